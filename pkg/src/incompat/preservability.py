"""Two-sided bounds on the incompatibility-preservability robustness.

The robustness of a channel N is the least t >= 0 such that
(N + t W)/(1 + t) annihilates incompatibility for some channel W. Exact
membership in the annihilating set quantifies over *all* assemblages, so
this module brackets the value instead:

* lower bounds from a finite probe family: the free set is relaxed to
  "every probe's Heisenberg pushforward is jointly measurable", a
  superset of the true free set, so the restricted robustness can only
  shrink;
* upper bounds from the entanglement-breaking inner approximation: an
  EB channel maps every assemblage to a jointly measurable one (measure
  then prepare), so robustness measured against EB channels can only
  grow. EB-ness is encoded as PPT of the Choi state, which is exact for
  qubit channels and explicitly heuristic above;
* analytic lower bounds from the singlet fraction, and the closed-form
  depolarising results.

The restricted-robustness SDP is linearized by the substitution
C = t * Choi(W): C ranges over PSD operators whose output marginal is
(t/d) Id, which encodes both "W is a channel" and t = tr C.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import (
    BoundUnavailableError,
    InternalInconsistencyError,
    InvalidParameterError,
    SolverError,
)
from . import sdp
from .channels import heisenberg, pushforward, singlet_fraction
from .jm import JmVerdict, deterministic_responses, jm_decide, mub_assemblage, pauli_assemblage
from .linalg import partial_transpose, psd_clip
from .objects import Channel, MeasurementAssemblage
from .sdp import (
    SdpProblem,
    const_expr,
    scalar_expr,
    sop_adjoint_action,
    sop_partial_trace,
    sop_partial_transpose,
    sum_exprs,
    superop_expr,
    var_expr,
)


@dataclass(frozen=True)
class ProbeFamily:
    """A finite family of assemblages standing in for the universal
    quantifier over measurements. Certificates obtained through a probe
    family are one-sided: detecting incompatibility on a pushforward is
    sound, failing to detect it proves nothing."""

    probes: tuple[MeasurementAssemblage, ...]

    def __post_init__(self):
        if not self.probes:
            raise InvalidParameterError("probe family must be non-empty")
        d = self.probes[0].dim
        if any(p.dim != d for p in self.probes):
            raise InvalidParameterError("probes must share one dimension")
        for p in self.probes:
            deterministic_responses(p.outcome_counts())  # enforces the cap

    @property
    def dim(self) -> int:
        return self.probes[0].dim

    @property
    def descriptor(self) -> str:
        return "+".join(p.name or f"probe{i}" for i, p in enumerate(self.probes))


def xz_probes(tol: Tolerances = DEFAULT_TOL) -> ProbeFamily:
    return ProbeFamily((pauli_assemblage(include_y=False, tol=tol),))


def xyz_probes(d: int = 2, tol: Tolerances = DEFAULT_TOL) -> ProbeFamily:
    """Default family: the complete MUB assemblage at dimension d."""
    return ProbeFamily((mub_assemblage(d, tol=tol),))


@dataclass(frozen=True)
class IaCertificateReport:
    channel: Channel
    probes: ProbeFamily
    per_probe: tuple[JmVerdict, ...]
    conclusion: str  # "incompatibility-preserved" | "no-incompatibility-detected"

    @property
    def preserved(self) -> bool:
        return self.conclusion == "incompatibility-preserved"

    @property
    def caveat(self) -> str:
        if self.preserved:
            return "sound certificate: at least one probe pushforward is incompatible"
        return ("not a membership proof: only this finite probe family was checked; "
                "other assemblages may still reveal incompatibility")


def probe_ia_test(n: Channel, f: ProbeFamily,
                  adapter: Optional[sdp.ConicAdapter] = None) -> IaCertificateReport:
    """Check every probe's pushforward for joint measurability.

    "incompatibility-preserved" soundly certifies that the channel does
    not annihilate incompatibility. "no-incompatibility-detected" is NOT
    a membership proof: it only says this finite family saw nothing.
    """
    verdicts = tuple(jm_decide(pushforward(n, probe), adapter=adapter) for probe in f.probes)
    preserved = any(not v.jm for v in verdicts)
    return IaCertificateReport(
        n, f, verdicts,
        "incompatibility-preserved" if preserved else "no-incompatibility-detected",
    )


# ---------------------------------------------------------------------------
# Probe-relaxed robustness lower bound
# ---------------------------------------------------------------------------


@dataclass
class RestrictedRobustnessResult:
    value: float           # clamped to >= 0
    raw_value: float
    solution: sdp.SdpSolution
    witness: np.ndarray    # PSD bipartite operator Y on (out) x (in copy)
    w_choi: Optional[np.ndarray] = None  # Choi of the optimal mixing channel W


def _restricted_robustness_problem(n: Channel, f: ProbeFamily
                                   ) -> tuple[SdpProblem, list[tuple[str, np.ndarray]]]:
    d = n.dim_in
    big = d * d
    p = SdpProblem("minimize")
    t = p.add_var("t", 1, psd=False)
    c = p.add_var("C", big, psd=True)

    p.add_equality(
        "marg",
        superop_expr(c, sop_partial_trace(d, d, "a"), d) - scalar_expr(t, np.eye(d) / d),
        np.zeros((d, d)),
    )

    matched: list[tuple[str, np.ndarray]] = []
    for pi, probe in enumerate(f.probes):
        responses = deterministic_responses(probe.outcome_counts())
        h_vars = [p.add_var(f"H{pi}_{lam}", d, psd=True) for lam in range(len(responses))]
        p.add_equality(
            f"comp:{pi}",
            sum_exprs([var_expr(h) for h in h_vars]) - scalar_expr(t, np.eye(d)),
            np.eye(d),
        )
        for x in range(probe.n_settings):
            for a in range(len(probe.settings[x]) - 1):
                eff = probe.effect(x, a)
                members = [h_vars[lam] for lam, r in enumerate(responses) if r.answers(x, a)]
                expr = sum_exprs([var_expr(h) for h in members]) if members else const_expr(np.zeros((d, d)))
                expr = expr - superop_expr(c, sop_adjoint_action(eff, d), d)
                name = f"match:{pi}:{x}:{a}"
                p.add_equality(name, expr, heisenberg(n, eff))
                matched.append((name, eff))
    p.set_objective({"t": 1.0})
    return p, matched


def restricted_robustness_sdp(n: Channel, f: ProbeFamily,
                              adapter: Optional[sdp.ConicAdapter] = None
                              ) -> RestrictedRobustnessResult:
    """Solve the probe-relaxed robustness SDP and extract its dual witness.

    The dual yields a PSD bipartite operator Y with
    tr[Y Choi(N)] = 1 + t* while every channel in the relaxed free set
    scores at most 1, which is exactly the operator behind the
    filter-game lower bound.
    """
    if n.dim_in != n.dim_out:
        raise InvalidParameterError("robustness bounds need dim_in == dim_out")
    if f.dim != n.dim_out:
        raise InvalidParameterError("probe dimension must match the channel")
    d = n.dim_in
    p, matched = _restricted_robustness_problem(n, f)
    sol = sdp.solve(p, adapter=adapter, tol=n.tol)
    if sol.status != "optimal":
        raise SolverError(f"restricted robustness SDP: {sol.solver_status}", sol.solver_status)

    z = sol.dual.get("marg")
    if z is None:
        raise SolverError("restricted robustness SDP returned no duals", sol.solver_status)
    y = np.kron(np.eye(d, dtype=complex), z)
    for name, eff in matched:
        f_tilde = -sol.dual[name]
        y = y + d * np.kron(eff, f_tilde.T)
    y = psd_clip(y)

    raw = float(sol.value)
    # recover W from the substitution C = t Choi(W); skip for vanishing t
    w_choi = None
    if raw >= 1e-9:
        w_choi = sol.primal["C"] / raw
    return RestrictedRobustnessResult(max(raw, 0.0), raw, sol, y, w_choi)


def restricted_robustness_lb(n: Channel, f: ProbeFamily,
                             adapter: Optional[sdp.ConicAdapter] = None) -> float:
    """Lower bound on the robustness from the probe relaxation.

    Zero exactly when the probe family detects nothing on the channel
    itself (the t = 0 point is then feasible).
    """
    return restricted_robustness_sdp(n, f, adapter=adapter).value


# ---------------------------------------------------------------------------
# Entanglement-breaking upper bound
# ---------------------------------------------------------------------------


def eb_robustness_ub(n: Channel, heuristic: bool = False,
                     adapter: Optional[sdp.ConicAdapter] = None) -> float:
    """Robustness measured against entanglement-breaking channels.

    min t such that (Choi(N) + t Choi(W))/(1+t) is PPT with a valid
    channel marginal. EB channels annihilate incompatibility (measure
    then prepare gives a parent POVM for every pushforward), so this
    upper-bounds the robustness whenever PPT certifies separability,
    i.e. exactly for qubit channels. Call with ``heuristic=True`` to get
    the (non-certified) PPT value at d >= 3.
    """
    if n.dim_in != n.dim_out:
        raise InvalidParameterError("EB bound needs dim_in == dim_out")
    d = n.dim_in
    if d > 2 and not heuristic:
        raise BoundUnavailableError(
            "PPT equals separability only at d=2; pass heuristic=True to force"
        )
    big = d * d
    p = SdpProblem("minimize")
    t = p.add_var("t", 1, psd=False)
    c = p.add_var("C", big, psd=True)
    p.add_equality(
        "marg",
        superop_expr(c, sop_partial_trace(d, d, "a"), d) - scalar_expr(t, np.eye(d) / d),
        np.zeros((d, d)),
    )
    pt = sop_partial_transpose(d, d, "b")
    p.add_lmi("ppt", superop_expr(c, pt, big) + const_expr(partial_transpose(n.choi, (d, d), "b")))
    p.set_objective({"t": 1.0})
    sol = sdp.solve(p, adapter=adapter, tol=n.tol)
    if sol.status != "optimal":
        raise SolverError(f"EB robustness SDP: {sol.solver_status}", sol.solver_status)
    return max(float(sol.value), 0.0)


# ---------------------------------------------------------------------------
# Analytic singlet-fraction bounds and the depolarising family
# ---------------------------------------------------------------------------


def is_prime_power(d: int) -> bool:
    if d < 2:
        return False
    for q in range(2, d + 1):
        if q * q > d and q < d:
            break
        if d % q == 0:
            while d % q == 0:
                d //= q
            return d == 1
    return True  # d itself prime


def mub_factor(d: int) -> float:
    """The dimension factor d sqrt(d+1) / (d - 1 + sqrt(d+1)).

    Multiplying the singlet fraction by this factor lower-bounds 1 + R
    for prime-power d.
    """
    if not is_prime_power(d):
        raise BoundUnavailableError(f"MUB factor needs a prime-power dimension, got {d}")
    s = math.sqrt(d + 1)
    return d * s / (d - 1 + s)


QUBIT_SF_FACTOR = 8.0 / 5.0          # exact steering constant at d = 2
QUBIT_SF_THRESHOLD = 5.0 / 8.0       # singlet fraction above this certifies preservability


@dataclass(frozen=True)
class SingletFractionBound:
    f_plus: float
    factor: float
    lower: float                      # max(0, f_plus * factor - 1)
    threshold: float                  # 1 / factor
    certifies_preservability: bool
    method: str


def sf_lower_bounds(n: Channel) -> SingletFractionBound:
    """Lower bound on the robustness from the channel's singlet fraction.

    Uses the exact 8/5 constant for qubits and the MUB factor for other
    prime-power dimensions; refuses dimensions where neither applies.
    """
    d = n.dim_in
    f_plus = singlet_fraction(n)
    if d == 2:
        factor, method = QUBIT_SF_FACTOR, "qubit-8/5"
    elif is_prime_power(d):
        factor, method = mub_factor(d), f"mub-factor(d={d})"
    else:
        raise BoundUnavailableError(f"no singlet-fraction bound at d={d} (not a prime power)")
    threshold = 1.0 / factor
    return SingletFractionBound(
        f_plus=f_plus,
        factor=factor,
        lower=max(0.0, f_plus * factor - 1.0),
        threshold=threshold,
        certifies_preservability=f_plus > threshold,
        method=method,
    )


def harmonic_number(d: int) -> float:
    return sum(1.0 / k for k in range(1, d + 1))


@dataclass(frozen=True)
class DepolarisingReport:
    p: float
    d: int
    h_d: float
    ia_threshold: float               # (H_d - 1) / (d - 1)
    membership_exact: bool            # threshold is iff (true only for d = 2)
    in_ia: Optional[bool]             # None when undecided (d > 2 above threshold)
    f_plus: float
    sandwich: Optional[tuple[float, float]]  # qubit-only robustness bracket


def depolarising_report(p: float, d: int) -> DepolarisingReport:
    """Closed-form facts about the depolarising channel at (p, d).

    Below (H_d - 1)/(d - 1) the channel annihilates incompatibility; for
    qubits the converse also holds and the robustness is bracketed by
    [3/5 max{0, 2p-1}, max{0, 2p-1}].
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"p must be in [0, 1], got {p}")
    if d < 2:
        raise InvalidParameterError(f"d must be >= 2, got {d}")
    h_d = harmonic_number(d)
    threshold = (h_d - 1.0) / (d - 1.0)
    exact = d == 2
    if p <= threshold:
        in_ia: Optional[bool] = True
    else:
        in_ia = False if exact else None
    f_plus = p + (1.0 - p) / (d * d)
    sandwich = None
    if d == 2:
        base = max(0.0, 2.0 * p - 1.0)
        sandwich = (0.6 * base, base)
    return DepolarisingReport(p, d, h_d, threshold, exact, in_ia, f_plus, sandwich)


# ---------------------------------------------------------------------------
# Aggregate bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RobustnessBounds:
    lower: float
    upper: float
    lower_method: str
    upper_method: str
    dim: int
    upper_certified: bool = True

    def __post_init__(self):
        # a heuristic upper (PPT at d >= 3) may legitimately cross; only a
        # crossing between certified bounds signals a bug
        if self.upper_certified and not (0.0 <= self.lower <= self.upper + DEFAULT_TOL.gap):
            raise InternalInconsistencyError(
                f"bound ordering violated: lower={self.lower}, upper={self.upper}"
            )


def bounds(n: Channel, f: ProbeFamily, include_game_witness: bool = True,
           adapter: Optional[sdp.ConicAdapter] = None) -> RobustnessBounds:
    """Best certified interval for the robustness of a channel.

    Lower: max over the probe-relaxed SDP, the singlet-fraction bound
    (when available) and, optionally, the filter-game witness bound.
    Upper: the EB bound, certified for qubits. A crossed interval raises
    InternalInconsistencyError since every bound is certified.
    """
    candidates: list[tuple[float, str]] = []
    res = restricted_robustness_sdp(n, f, adapter=adapter)
    candidates.append((res.value, f"probe-family:{f.descriptor}"))
    try:
        sf = sf_lower_bounds(n)
        candidates.append((sf.lower, f"singlet-fraction:{sf.method}"))
    except BoundUnavailableError:
        pass
    if include_game_witness:
        from .games import witness_bound

        gb = witness_bound(n, f, adapter=adapter, _precomputed=res)
        candidates.append((max(0.0, gb.ratio_lb - 1.0), "game-witness"))
    lower, lower_method = max(candidates, key=lambda c: c[0])

    heuristic = n.dim_in > 2
    upper = eb_robustness_ub(n, heuristic=heuristic, adapter=adapter)
    upper_method = "eb-ppt" + (" (heuristic)" if heuristic else " (certified)")
    return RobustnessBounds(lower, upper, lower_method, upper_method, n.dim_in,
                            upper_certified=not heuristic)
