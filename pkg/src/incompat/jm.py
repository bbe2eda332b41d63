"""Joint measurability: decision SDP, certificates, visibility thresholds.

An assemblage {E_{a|x}} is jointly measurable iff a single parent POVM
{G_lam} exists with E_{a|x} = sum_{lam} P(a|x,lam) G_lam. Without loss
of generality the response distributions can be taken deterministic, one
per tuple of outcomes (a_x)_x, which turns the decision into a
feasibility SDP over the G_lam:

    sum_{lam : lam_x = a} G_lam = E_{a|x}   for all x and a,
    sum_lam G_lam = Id,   G_lam >= 0.

The redundant last-outcome group of each setting is dropped (it is
implied by completeness), keeping the equality system full rank. The
margin reported by the slack solver doubles as the incompatibility
witness: jointly measurable iff margin >= -tol_feas.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import InvalidParameterError, InvalidShapeError, SolverError, TooLargeError
from . import sdp
from .linalg import is_hermitian, min_eig
from .objects import Effect, MeasurementAssemblage, assemblage_from_matrices
from .sdp import SdpProblem, scalar_expr, sum_exprs, var_expr

RESPONSE_CAP = 4096


@dataclass(frozen=True)
class DeterministicResponse:
    """One deterministic post-processing: setting x answers table[x]."""

    table: tuple[int, ...]

    def answers(self, x: int, a: int) -> bool:
        return self.table[x] == a


def deterministic_responses(outcome_counts: Sequence[int], cap: int = RESPONSE_CAP
                            ) -> list[DeterministicResponse]:
    """All outcome tuples in lexicographic order (earlier settings slower)."""
    total = math.prod(outcome_counts)
    if total > cap:
        raise TooLargeError(f"{total} response tuples exceed the cap of {cap}")
    return [DeterministicResponse(t) for t in itertools.product(*(range(n) for n in outcome_counts))]


@dataclass(frozen=True)
class ParentPOVM:
    """A parent POVM {G_lam} with response distributions.

    ``responses`` is either a list of :class:`DeterministicResponse`
    (one per effect) or a stochastic table: a list over settings x of
    arrays P[a, lam]. Certificates produced by this package are always
    deterministic; stochastic tables are accepted on input only.
    """

    effects: tuple[np.ndarray, ...]
    responses: Union[tuple[DeterministicResponse, ...], tuple[np.ndarray, ...]]
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        effects = tuple(np.asarray(g, dtype=complex) for g in self.effects)
        d = effects[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for g in effects:
            if not is_hermitian(g, self.tol.herm):
                raise InvalidShapeError("parent POVM element not Hermitian")
            if min_eig(g) < -self.tol.psd:
                raise InvalidShapeError("parent POVM element not PSD within tolerance")
            total += g
        if np.max(np.abs(total - np.eye(d))) > self.tol.tp:
            raise InvalidShapeError("parent POVM does not sum to identity")
        if self.deterministic:
            if len(self.responses) != len(effects):
                raise InvalidShapeError("need one deterministic response per POVM element")
        else:
            for table in self.responses:
                t = np.asarray(table, dtype=float)
                if np.any(t < -1e-12) or np.max(np.abs(t.sum(axis=0) - 1.0)) > 1e-9:
                    raise InvalidShapeError("stochastic responses must be distributions over a")
        object.__setattr__(self, "effects", effects)

    @property
    def deterministic(self) -> bool:
        return bool(self.responses) and isinstance(self.responses[0], DeterministicResponse)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def reconstruct(self, x: int, a: int) -> np.ndarray:
        """The effect sum_lam P(a|x,lam) G_lam."""
        d = self.dim
        out = np.zeros((d, d), dtype=complex)
        if self.deterministic:
            for resp, g in zip(self.responses, self.effects):
                if resp.answers(x, a):
                    out += g
        else:
            for lam, g in enumerate(self.effects):
                out += float(self.responses[x][a, lam]) * g
        return out

    def reconstruction_residual(self, e: MeasurementAssemblage) -> float:
        worst = 0.0
        for x in range(e.n_settings):
            for a in range(len(e.settings[x])):
                worst = max(worst, float(np.max(np.abs(self.reconstruct(x, a) - e.effect(x, a)))))
        return worst


@dataclass(frozen=True)
class JmVerdict:
    jm: bool
    certificate: Optional[ParentPOVM]
    margin: float


def _jm_problem(e: MeasurementAssemblage, responses: list[DeterministicResponse],
                visibility: Optional[sdp.HermitianVariable] = None,
                problem: Optional[SdpProblem] = None,
                prefix: str = "") -> SdpProblem:
    """Assemble the parent-POVM equality system for one assemblage.

    With a visibility variable eta, the matched targets become
    eta * E + (1 - eta) * tr(E) Id / d, linear in (eta, G).
    """
    d = e.dim
    p = problem if problem is not None else SdpProblem("feasibility")
    g_vars = [p.add_var(f"{prefix}G{lam}", d, psd=True) for lam in range(len(responses))]

    for x in range(e.n_settings):
        n_out = len(e.settings[x])
        for a in range(n_out - 1):
            members = [g_vars[lam] for lam, r in enumerate(responses) if r.answers(x, a)]
            if members:
                expr = sum_exprs([var_expr(g) for g in members])
            else:
                expr = sdp.const_expr(np.zeros((d, d)))
            eff = e.effect(x, a)
            if visibility is None:
                p.add_equality(f"{prefix}match:{x}:{a}", expr, eff)
            else:
                noise = np.trace(eff).real * np.eye(d) / d
                expr = expr - scalar_expr(visibility, eff - noise)
                p.add_equality(f"{prefix}match:{x}:{a}", expr, noise)
    p.add_equality(f"{prefix}complete", sum_exprs([var_expr(g) for g in g_vars]), np.eye(d))
    return p


def jm_decide(e: MeasurementAssemblage, cap: int = RESPONSE_CAP,
              adapter: Optional[sdp.ConicAdapter] = None) -> JmVerdict:
    """Decide joint measurability and return a parent-POVM certificate.

    Single-setting assemblages are trivially jointly measurable; the
    certificate is the POVM itself with the identity response.
    """
    tol = e.tol
    responses = deterministic_responses(e.outcome_counts(), cap=cap)
    p = _jm_problem(e, responses)
    sol = sdp.solve(p, adapter=adapter, tol=tol)
    if sol.status not in ("optimal", "infeasible"):
        raise SolverError(f"JM decision SDP failed: {sol.solver_status}", sol.solver_status)
    margin = float(sol.margin)
    if sol.status != "optimal":
        return JmVerdict(False, None, margin)
    effects = [sol.primal[f"G{lam}"] for lam in range(len(responses))]
    # a certificate at margin >= -tol_feas may dip slightly below tol_psd
    cert_tol = tol.override(psd=max(tol.psd, 2 * tol.feas))
    cert = ParentPOVM(tuple(effects), tuple(responses), tol=cert_tol)
    residual = cert.reconstruction_residual(e)
    if residual > tol.cert:
        raise SolverError(
            f"JM certificate reconstruction residual {residual:.2e} exceeds tolerance"
        )
    return JmVerdict(True, cert, margin)


def jm_visibility(e: MeasurementAssemblage, cap: int = RESPONSE_CAP,
                  adapter: Optional[sdp.ConicAdapter] = None) -> float:
    """Largest eta in [0, 1] with eta E + (1-eta) tr(E) Id/d jointly measurable.

    Solved as a single SDP with eta a scalar variable; all constraints
    stay linear in (eta, {G_lam}).
    """
    responses = deterministic_responses(e.outcome_counts(), cap=cap)
    p = SdpProblem("maximize")
    eta = p.add_var("eta", 1, psd=False)
    _jm_problem(e, responses, visibility=eta, problem=p)
    p.add_lmi("eta_cap", sdp.const_expr(np.eye(1)) - var_expr(eta))
    p.set_objective({"eta": 1.0})
    sol = sdp.solve(p, adapter=adapter, tol=e.tol)
    if sol.status != "optimal":
        raise SolverError(f"visibility SDP failed: {sol.solver_status}", sol.solver_status)
    return min(float(sol.value), 1.0)


def jm_visibility_bisect(e: MeasurementAssemblage, tol: float = 1e-5,
                         cap: int = RESPONSE_CAP,
                         adapter: Optional[sdp.ConicAdapter] = None) -> float:
    """Visibility threshold by bisection over the feasibility family.

    Cross-validates the direct SDP; returns 1.0 when even the noiseless
    assemblage is jointly measurable.
    """
    responses = deterministic_responses(e.outcome_counts(), cap=cap)
    d = e.dim

    def family(eta: float) -> SdpProblem:
        noisy = assemblage_from_matrices(
            d,
            [
                [eta * e.effect(x, a) + (1 - eta) * np.trace(e.effect(x, a)).real * np.eye(d) / d
                 for a in range(len(e.settings[x]))]
                for x in range(e.n_settings)
            ],
            tol=e.tol,
        )
        return _jm_problem(noisy, responses)

    if sdp.solve(family(1.0), adapter=adapter, tol=e.tol).feasible:
        return 1.0
    return sdp.bisect_feasibility(family, 0.0, 1.0, tol, adapter=adapter, tolerances=e.tol)


# ---------------------------------------------------------------------------
# Builtin assemblages
# ---------------------------------------------------------------------------


def _basis_to_povm(d: int, basis: np.ndarray, tol: Tolerances) -> list[Effect]:
    return [Effect(d, np.outer(basis[:, k], basis[:, k].conj()), tol=tol) for k in range(d)]


def pauli_assemblage(include_y: bool = False, tol: Tolerances = DEFAULT_TOL
                     ) -> MeasurementAssemblage:
    """The qubit Z/X projective pair, optionally extended by Y.

    Setting 0 measures Z (|0><0|, |1><1|), setting 1 measures X with
    |+-> = (|0> +- |1>)/sqrt2, and with ``include_y`` setting 2 measures
    Y with eigenstates (|0> +- i|1>)/sqrt2.
    """
    z = np.eye(2, dtype=complex)
    x = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    bases = [z, x]
    name = "pauli-xz"
    if include_y:
        bases.append(np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2))
        name = "pauli-xyz"
    settings = tuple(tuple(_basis_to_povm(2, b, tol)) for b in bases)
    return MeasurementAssemblage(2, settings, name=name, tol=tol)


def mub_assemblage(d: int, tol: Tolerances = DEFAULT_TOL) -> MeasurementAssemblage:
    """A complete set of mutually unbiased bases as an assemblage.

    d=2 gives the three Pauli bases; d=3 gives the four standard MUBs
    built from the cube roots of unity, with basis vectors
    v^{(k)}_j[m] = omega^{k m^2 + j m} / sqrt(3).
    """
    if d == 2:
        return pauli_assemblage(include_y=True, tol=tol)
    if d == 3:
        omega = np.exp(2j * np.pi / 3)
        bases = [np.eye(3, dtype=complex)]
        for k in range(3):
            b = np.zeros((3, 3), dtype=complex)
            for j in range(3):
                for m in range(3):
                    b[m, j] = omega ** ((k * m * m + j * m) % 3) / np.sqrt(3)
            bases.append(b)
        settings = tuple(tuple(_basis_to_povm(3, b, tol)) for b in bases)
        return MeasurementAssemblage(3, settings, name="mub-3", tol=tol)
    raise InvalidParameterError(f"mub_assemblage supports d in {{2, 3}}, got {d}")


def trivial_assemblage(e: MeasurementAssemblage) -> MeasurementAssemblage:
    """The compatible shadow {tr(E_{a|x}) Id / d} of an assemblage."""
    d = e.dim
    return assemblage_from_matrices(
        d,
        [[np.trace(e.effect(x, a)).real * np.eye(d) / d for a in range(len(e.settings[x]))]
         for x in range(e.n_settings)],
        name=f"trivial({e.name})",
        tol=e.tol,
    )
