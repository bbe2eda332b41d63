"""Entanglement-assisted filter games.

A referee fixes a filter K on the doubled system AA'. The player applies
a channel N to the A half of a maximally entangled state, and scores the
filter's success probability

    P(N, K) = tr[ K((N x Id)(phi+)) ].

The score only sees the operator K^dag(Id), so every general filter
reduces to the single-Kraus filter with operator
Gamma = sqrt(K^dag(Id)) without changing any score. Ratios of scores
against the best free channel certify lower bounds on 1 + robustness;
the denominator here is computed over the probe-relaxed free set (a
superset of the true one), which keeps every emitted ratio a certified
lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import InvalidParameterError, InvalidShapeError, SolverError
from . import sdp
from .allowed_ops import AllowedOperation, apply_ao, default_ao_bank, identity_ao
from .jm import deterministic_responses
from .linalg import max_entangled_vec, psd_sqrt
from .objects import Channel, Filter
from .preservability import (
    ProbeFamily,
    RestrictedRobustnessResult,
    restricted_robustness_sdp,
)
from .sdp import (
    SdpProblem,
    const_expr,
    sop_adjoint_action,
    sop_partial_trace,
    sum_exprs,
    superop_expr,
    var_expr,
)

ANALYTIC_QUBIT_PHI_DENOMINATOR = 5.0 / 8.0


def phi_plus_filter(d: int, tol: Tolerances = DEFAULT_TOL) -> Filter:
    """The single-Kraus filter projecting onto the maximally entangled state."""
    v = max_entangled_vec(d)
    proj = np.outer(v, v.conj())
    return Filter(d * d, (proj,), kind="f1", name="phi-plus", tol=tol)


@dataclass(frozen=True)
class GameScore:
    value: float
    channel_desc: str
    filter_desc: str


def score(n: Channel, k: Filter) -> GameScore:
    """Success probability of the filter on (N x Id)(phi+), in [0, 1]."""
    if n.dim_in != n.dim_out:
        raise InvalidShapeError("filter games need dim_in == dim_out")
    if k.dim != n.dim_in * n.dim_in:
        raise InvalidShapeError(
            f"filter dim {k.dim} != d^2 = {n.dim_in * n.dim_in} for the doubled system"
        )
    val = float(np.trace(k.adjoint(np.eye(k.dim)) @ n.choi).real)
    return GameScore(min(max(val, 0.0), 1.0), n.name or "channel", k.name or "filter")


def gamma_reduce(k: Filter) -> Filter:
    """Score-preserving reduction to a single PSD Kraus operator.

    Returns the filter with operator Gamma = sqrt(K^dag(Id)); since
    tr[Gamma rho Gamma] = tr[K^dag(Id) rho], every channel scores
    identically. Gamma's spectrum lies in [0, 1] because the input is
    trace non-increasing.
    """
    gamma = psd_sqrt(k.adjoint(np.eye(k.dim)))
    return Filter(k.dim, (gamma,), kind="f1", name=f"gamma({k.name or 'filter'})", tol=k.tol)


def ia_denominator(k: Filter, f: ProbeFamily,
                   adapter: Optional[sdp.ConicAdapter] = None,
                   tol: Tolerances = DEFAULT_TOL) -> float:
    """Best score of the probe-relaxed free set against an F1 filter.

    Maximizes tr[K J] over Choi states J with channel marginal whose
    probe pushforwards are all jointly measurable. The relaxed set
    contains the true free set, so this value can only exceed the true
    denominator; ratios built from it remain certified lower bounds.
    """
    if k.kind != "f1":
        raise InvalidParameterError("denominator needs an F1 filter; gamma_reduce first")
    d2 = k.dim
    d = int(round(np.sqrt(d2)))
    if d * d != d2 or f.dim != d:
        raise InvalidShapeError("filter must act on d^2 with d matching the probes")

    k_op = k.kraus[0] @ k.kraus[0]  # score of an F1 filter is tr[(sqrtK)^2 J]
    p = SdpProblem("maximize")
    j = p.add_var("J", d2, psd=True)
    p.add_equality(
        "marg",
        superop_expr(j, sop_partial_trace(d, d, "a"), d),
        np.eye(d) / d,
    )
    for pi, probe in enumerate(f.probes):
        responses = deterministic_responses(probe.outcome_counts())
        g_vars = [p.add_var(f"G{pi}_{lam}", d, psd=True) for lam in range(len(responses))]
        p.add_equality(f"comp:{pi}", sum_exprs([var_expr(g) for g in g_vars]), np.eye(d))
        for x in range(probe.n_settings):
            for a in range(len(probe.settings[x]) - 1):
                eff = probe.effect(x, a)
                members = [g_vars[lam] for lam, r in enumerate(responses) if r.answers(x, a)]
                expr = sum_exprs([var_expr(g) for g in members]) if members \
                    else const_expr(np.zeros((d, d)))
                expr = expr - superop_expr(j, sop_adjoint_action(eff, d), d)
                p.add_equality(f"match:{pi}:{x}:{a}", expr, np.zeros((d, d)))
    p.set_objective({"J": (k_op + k_op.conj().T) / 2})
    sol = sdp.solve(p, adapter=adapter, tol=tol)
    if sol.status != "optimal":
        raise SolverError(f"denominator SDP failed: {sol.solver_status}", sol.solver_status)
    return min(max(float(sol.value), 0.0), 1.0)


@dataclass(frozen=True)
class GameBound:
    """A certified lower bound ratio_lb <= 1 + robustness."""

    filter: Filter
    numerator: float
    denominator: float
    ratio_lb: float
    denominator_method: str

    def __post_init__(self):
        if not 0.0 < self.denominator <= 1.0 + 1e-9:
            raise InvalidParameterError(f"denominator {self.denominator} outside (0, 1]")


def game_lb(n: Channel, k: Filter, f: Optional[ProbeFamily] = None,
            denominator: str = "sdp",
            adapter: Optional[sdp.ConicAdapter] = None) -> GameBound:
    """Filter-game lower bound on 1 + robustness.

    The filter is gamma-reduced first (scores are unchanged). With
    ``denominator="sdp"`` the free-set score is the probe-relaxed SDP
    value; ``denominator="analytic"`` uses the exact qubit constant 5/8,
    valid only for the phi+ projector filter at d=2.
    """
    g = gamma_reduce(k)
    num = score(n, g).value
    if denominator == "sdp":
        if f is None:
            raise InvalidParameterError("sdp denominator needs a probe family")
        den = ia_denominator(g, f, adapter=adapter, tol=n.tol)
        method = f"probe-sdp:{f.descriptor}"
    elif denominator == "analytic":
        v = max_entangled_vec(n.dim_in)
        proj = np.outer(v, v.conj())
        if n.dim_in != 2 or np.max(np.abs(g.kraus[0] - proj)) > 1e-9:
            raise InvalidParameterError(
                "analytic denominator applies only to the phi+ filter at d=2"
            )
        den = ANALYTIC_QUBIT_PHI_DENOMINATOR
        method = "analytic-5/8"
    else:
        raise InvalidParameterError(f"unknown denominator mode {denominator!r}")
    return GameBound(g, num, den, num / den, method)


def witness_bound(n: Channel, f: ProbeFamily,
                  adapter: Optional[sdp.ConicAdapter] = None,
                  _precomputed: Optional[RestrictedRobustnessResult] = None) -> GameBound:
    """Filter built from the robustness SDP's dual optimizer.

    The dual yields a PSD bipartite Y; the F1 filter with operator
    sqrt(Y / ||Y||_inf) attains ratio_lb = 1 + restricted robustness up
    to solver accuracy, realizing the game characterisation of the
    robustness at the relaxed level.
    """
    res = _precomputed if _precomputed is not None else restricted_robustness_sdp(
        n, f, adapter=adapter)
    y = res.witness
    top = float(np.linalg.eigvalsh(y)[-1])
    if top < 1e-12:
        raise SolverError("dual witness unavailable (vanishing Y)")
    k_op = psd_sqrt(y / top)
    # clip stray eigenvalues just above 1 introduced by the normalization
    vals, vecs = np.linalg.eigh(k_op)
    k_op = (vecs * np.clip(vals, 0.0, 1.0)) @ vecs.conj().T
    filt = Filter(n.dim_in ** 2, (k_op,), kind="f1", name="dual-witness", tol=n.tol)
    return game_lb(n, filt, f, denominator="sdp", adapter=adapter)


def pmax_search(n: Channel, k: Filter,
                bank: Optional[Sequence[AllowedOperation]] = None) -> float:
    """Best score over a finite bank of allowed operations.

    With no bank given, a seeded random bank is used. The identity
    operation is always included, so the result is at least score(n, k);
    either way it is a lower bound on the true supremum over all allowed
    operations.
    """
    if bank is None:
        bank = default_ao_bank(n.dim_in, tol=n.tol)
    ops = list(bank) + [identity_ao(n.dim_in, tol=n.tol)]
    return max(score(apply_ao(g, n), k).value for g in ops)


@dataclass(frozen=True)
class ConversionVerdict:
    """Outcome of the bank-restricted conversion probe.

    ``candidate-obstruction`` means some filter scored strictly better
    for the target than for the source over this bank. Both sides are
    lower bounds on the true optimal scores, so this is heuristic
    evidence against convertibility, not a proof; conversely
    ``no-obstruction-found`` never proves convertibility.
    """

    verdict: str
    margin: float
    details: tuple[tuple[str, float, float], ...]  # (filter, pmax_source, pmax_target)

    @property
    def obstructed(self) -> bool:
        return self.verdict == "candidate-obstruction"


def conversion_falsifier(n: Channel, m: Channel, filters: Sequence[Filter],
                         bank: Optional[Sequence[AllowedOperation]] = None,
                         margin: float = 1e-4) -> ConversionVerdict:
    """Search for a filter where the conversion target outscores the source."""
    if bank is None:
        bank = default_ao_bank(n.dim_in, tol=n.tol)
    details = []
    obstructed = False
    for k in filters:
        a = pmax_search(n, k, bank)
        b = pmax_search(m, k, bank)
        details.append((k.name or "filter", a, b))
        if b > a + margin:
            obstructed = True
    return ConversionVerdict(
        "candidate-obstruction" if obstructed else "no-obstruction-found",
        margin,
        tuple(details),
    )
