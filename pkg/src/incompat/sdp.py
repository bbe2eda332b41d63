"""Hermitian semidefinite programming over a real conic solver.

The kernel accepts problems stated in terms of complex Hermitian matrix
variables, affine equality constraints between Hermitian-valued
expressions, and a real linear objective. :func:`realify` translates
such a problem into a real symmetric conic problem: each Hermitian
``d x d`` variable ``X = A + iB`` becomes the ``2d x 2d`` real symmetric
block ``[[A, -B], [B, A]]`` (PSD iff X is), constraints and the
objective are doubled consistently, and solutions map back by Hermitian
part extraction. A narrow adapter (:class:`ClarabelAdapter` by default)
drives the conic solver; alternate solvers only need to implement
:meth:`solve_conic`.

Dual convention: for a minimize problem, the dual matrix reported for an
equality group ``expr == rhs`` is the multiplier F in the Lagrangian
``L = objective + sum_groups tr[F (expr - rhs)]``. Maximize problems are
canonicalized to ``minimize -objective`` first and the duals refer to
that form.

Feasibility problems follow the slack formulation: all PSD-constrained
variables X are relaxed to ``X >= s * Id`` for a common scalar margin s,
and s is maximized. The problem is declared feasible iff the optimal
margin is >= -tol_feas, which detects near-boundary cases much more
robustly than raw solver statuses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import BracketError, InvalidShapeError, SolverError
from .linalg import as_complex_matrix, is_hermitian

_SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Problem data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HermitianVariable:
    """A d x d complex Hermitian matrix variable (real scalar when d=1)."""

    id: str
    dim: int
    psd: bool = True

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidShapeError(f"variable {self.id}: dim must be >= 1")


class MatExpr:
    """Affine Hermitian-matrix-valued expression over problem variables.

    Stores one linear map per variable as a dense superoperator acting
    on the row-major vectorization: ``value = sum_v unvec(T_v vec(X_v))
    + const``. Supports +, -, and scaling by real numbers, which is all
    the formulations here need.
    """

    __slots__ = ("dim", "terms", "const")

    def __init__(self, dim: int, terms: Optional[dict[str, np.ndarray]] = None,
                 const: Optional[np.ndarray] = None):
        self.dim = dim
        self.terms: dict[str, np.ndarray] = dict(terms or {})
        self.const = np.zeros((dim, dim), dtype=complex) if const is None else np.array(const, dtype=complex)

    def copy(self) -> "MatExpr":
        return MatExpr(self.dim, {k: v.copy() for k, v in self.terms.items()}, self.const.copy())

    def _accumulate(self, var_id: str, t: np.ndarray) -> None:
        if var_id in self.terms:
            self.terms[var_id] = self.terms[var_id] + t
        else:
            self.terms[var_id] = np.array(t, dtype=complex)

    def __add__(self, other: "MatExpr") -> "MatExpr":
        if self.dim != other.dim:
            raise InvalidShapeError("expression dimensions differ")
        out = self.copy()
        for vid, t in other.terms.items():
            out._accumulate(vid, t)
        out.const = out.const + other.const
        return out

    def __sub__(self, other: "MatExpr") -> "MatExpr":
        return self + (-1.0) * other

    def __rmul__(self, c: float) -> "MatExpr":
        c = float(c)
        return MatExpr(self.dim, {k: c * v for k, v in self.terms.items()}, c * self.const)

    def __neg__(self) -> "MatExpr":
        return (-1.0) * self


def var_expr(v: HermitianVariable, coeff: float = 1.0) -> MatExpr:
    """The expression ``coeff * X`` for a real coefficient."""
    t = float(coeff) * np.eye(v.dim * v.dim, dtype=complex)
    return MatExpr(v.dim, {v.id: t})


def scalar_expr(v: HermitianVariable, mat: np.ndarray) -> MatExpr:
    """The expression ``y * M`` for a scalar variable y and constant M."""
    if v.dim != 1:
        raise InvalidShapeError(f"scalar_expr needs a dim-1 variable, got {v.dim}")
    m = as_complex_matrix(mat)
    return MatExpr(m.shape[0], {v.id: m.reshape(-1, 1)})


def const_expr(mat: np.ndarray) -> MatExpr:
    m = as_complex_matrix(mat)
    return MatExpr(m.shape[0], const=m)


def superop_expr(v: HermitianVariable, t: np.ndarray, dim: int) -> MatExpr:
    """The expression ``unvec(T vec(X))`` for an explicit superoperator."""
    t = np.asarray(t, dtype=complex)
    if t.shape != (dim * dim, v.dim * v.dim):
        raise InvalidShapeError(
            f"superoperator shape {t.shape} does not map dim {v.dim} to dim {dim}"
        )
    return MatExpr(dim, {v.id: t})


def sum_exprs(exprs: Sequence[MatExpr]) -> MatExpr:
    it = iter(exprs)
    out = next(it).copy()
    for e in it:
        out = out + e
    return out


# -- superoperator builders (row-major vec) ---------------------------------


def sop_conjugate(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """X -> A X B as a superoperator: kron(A, B^T) under row-major vec."""
    return np.kron(a, b.T)


def sop_trace(d: int) -> np.ndarray:
    """X -> tr(X) as a 1 x d^2 superoperator."""
    t = np.zeros((1, d * d), dtype=complex)
    t[0, :: d + 1] = 1.0
    return t


def sop_partial_trace(d_a: int, d_b: int, traced: str) -> np.ndarray:
    """Partial trace over one factor of a (d_a x d_b) bipartite operator."""
    d = d_a * d_b
    if traced == "a":
        out_d = d_b
    elif traced == "b":
        out_d = d_a
    else:
        raise InvalidShapeError("traced must be 'a' or 'b'")
    t = np.zeros((out_d * out_d, d * d), dtype=complex)
    for i in range(d_a):
        for j in range(d_b):
            for k in range(d_a):
                for n in range(d_b):
                    col = (i * d_b + j) * d + (k * d_b + n)
                    if traced == "a" and i == k:
                        t[j * d_b + n, col] += 1.0
                    if traced == "b" and j == n:
                        t[i * d_a + k, col] += 1.0
    return t


def sop_partial_transpose(d_a: int, d_b: int, which: str = "b") -> np.ndarray:
    """Partial transpose on one factor as a superoperator."""
    d = d_a * d_b
    t = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d_a):
        for j in range(d_b):
            for k in range(d_a):
                for n in range(d_b):
                    r = (i * d_b + j) * d + (k * d_b + n)
                    if which == "b":
                        c = (i * d_b + n) * d + (k * d_b + j)
                    else:
                        c = (k * d_b + j) * d + (i * d_b + n)
                    t[r, c] = 1.0
    return t


def sop_adjoint_action(e: np.ndarray, d_in: int) -> np.ndarray:
    """Choi-like C -> d_in * (tr_out[C (E kron Id)])^T.

    For C the (scaled) Choi state of a map W this evaluates W^dag(E), so
    constraints on Heisenberg pushforwards stay linear in C.
    """
    d_out = e.shape[0]
    d = d_out * d_in
    t = np.zeros((d_in * d_in, d * d), dtype=complex)
    for m in range(d_in):
        for n in range(d_in):
            for i in range(d_out):
                for j in range(d_out):
                    # result[m, n] = d_in * sum_{i,j} C[(i,n),(j,m)] E[j,i]
                    t[m * d_in + n, (i * d_in + n) * d + (j * d_in + m)] += d_in * e[j, i]
    return t


def sop_block_diag_extract(big: int, offset: int, d: int) -> np.ndarray:
    """V -> V[offset:offset+d, offset:offset+d] (a principal block)."""
    t = np.zeros((d * d, big * big), dtype=complex)
    for m in range(d):
        for n in range(d):
            t[m * d + n, (offset + m) * big + (offset + n)] = 1.0
    return t


def sop_kron_id_left(k: int, d: int) -> np.ndarray:
    """rho -> Id_k kron rho."""
    big = k * d
    t = np.zeros((big * big, d * d), dtype=complex)
    for i in range(k):
        for m in range(d):
            for n in range(d):
                t[(i * d + m) * big + (i * d + n), m * d + n] = 1.0
    return t


# ---------------------------------------------------------------------------
# Constraints, objective, problem
# ---------------------------------------------------------------------------


@dataclass
class Constraint:
    name: str
    expr: MatExpr
    rhs: np.ndarray


@dataclass
class Objective:
    """Real linear functional sum_v tr[W_v X_v] + const."""

    weights: dict[str, np.ndarray]
    const: float = 0.0


class SdpProblem:
    """A complex Hermitian SDP: variables, equalities, optional objective.

    ``sense`` is one of ``"minimize"``, ``"maximize"``, ``"feasibility"``.
    Linear matrix inequalities are added through :meth:`add_lmi`, which
    rewrites ``expr >= 0`` as ``expr == S`` for a fresh PSD slack
    variable, so the stored problem is always in pure equality form.
    """

    def __init__(self, sense: str):
        if sense not in ("minimize", "maximize", "feasibility"):
            raise InvalidShapeError(f"unknown sense {sense!r}")
        self.sense = sense
        self.variables: dict[str, HermitianVariable] = {}
        self.constraints: list[Constraint] = []
        self.objective: Optional[Objective] = None
        self._slack_count = 0

    def add_var(self, var_id: str, dim: int, psd: bool = True) -> HermitianVariable:
        if var_id in self.variables:
            raise InvalidShapeError(f"duplicate variable id {var_id!r}")
        v = HermitianVariable(var_id, dim, psd)
        self.variables[var_id] = v
        return v

    def add_equality(self, name: str, expr: MatExpr, rhs: np.ndarray | float) -> None:
        if np.isscalar(rhs):
            rhs = np.array([[rhs]], dtype=complex)
        rhs = as_complex_matrix(rhs, f"rhs of {name}")
        if rhs.shape != (expr.dim, expr.dim):
            raise InvalidShapeError(f"constraint {name}: rhs shape {rhs.shape} != dim {expr.dim}")
        self._validate_hermitian_consistency(name, expr, rhs)
        self.constraints.append(Constraint(name, expr, rhs))

    def add_lmi(self, name: str, expr: MatExpr) -> HermitianVariable:
        """Add ``expr >= 0`` via a PSD slack: expr - S == 0. Returns S."""
        self._slack_count += 1
        slack = self.add_var(f"_slack_{self._slack_count}:{name}", expr.dim, psd=True)
        self.add_equality(name, expr - var_expr(slack), np.zeros((expr.dim, expr.dim)))
        return slack

    def set_objective(self, weights: dict[str, np.ndarray | float], const: float = 0.0) -> None:
        if self.sense == "feasibility":
            raise InvalidShapeError("feasibility problems take no objective")
        w = {}
        for vid, mat in weights.items():
            if vid not in self.variables:
                raise InvalidShapeError(f"objective references unknown variable {vid!r}")
            if np.isscalar(mat):
                mat = np.array([[mat]], dtype=complex)
            m = as_complex_matrix(mat, f"objective weight for {vid}")
            if m.shape != (self.variables[vid].dim,) * 2:
                raise InvalidShapeError(f"objective weight for {vid}: wrong shape")
            if not is_hermitian(m, 1e-12):
                raise InvalidShapeError(f"objective weight for {vid}: not Hermitian")
            w[vid] = m
        self.objective = Objective(w, float(const))

    def _validate_hermitian_consistency(self, name: str, expr: MatExpr, rhs: np.ndarray) -> None:
        if not is_hermitian(rhs, 1e-12) or not is_hermitian(expr.const, 1e-12):
            raise InvalidShapeError(f"constraint {name}: constant part not Hermitian")
        e = expr.dim
        for vid, t in expr.terms.items():
            if vid not in self.variables:
                raise InvalidShapeError(f"constraint {name}: unknown variable {vid!r}")
            dv = self.variables[vid].dim
            if t.shape != (e * e, dv * dv):
                raise InvalidShapeError(f"constraint {name}: bad superoperator shape for {vid}")
            # Hermitian X must map to Hermitian output: T[(m,n),(p,q)] == conj(T[(n,m),(q,p)])
            t4 = t.reshape(e, e, dv, dv)
            if np.max(np.abs(t4 - t4.transpose(1, 0, 3, 2).conj())) > 1e-10:
                raise InvalidShapeError(
                    f"constraint {name}: term for {vid} is not Hermiticity-preserving"
                )


# ---------------------------------------------------------------------------
# Realification
# ---------------------------------------------------------------------------


def _svec_indices(n: int) -> list[tuple[int, int]]:
    """Upper-triangle column-major order, matching the solver's svec."""
    return [(r, c) for c in range(n) for r in range(c + 1)]


def svec(m: np.ndarray) -> np.ndarray:
    """Scaled vectorization of a symmetric matrix (off-diagonals x sqrt2)."""
    n = m.shape[0]
    return np.array([m[r, c] * (_SQRT2 if r != c else 1.0) for r, c in _svec_indices(n)])


def smat(x: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, n))
    for val, (r, c) in zip(x, _svec_indices(n)):
        if r == c:
            out[r, c] = val
        else:
            out[r, c] = val / _SQRT2
            out[c, r] = val / _SQRT2
    return out


@lru_cache(maxsize=None)
def _probe_tensor(dv: int) -> np.ndarray:
    """Complex matrices extracted from the svec basis of the doubled block.

    Column i of the realified constraint matrix is the constraint
    evaluated at probe i, so building rows reduces to one matrix product
    per (constraint, variable) pair.
    """
    if dv == 1:
        return np.ones((1, 1, 1), dtype=complex)
    n = 2 * dv
    idx = _svec_indices(n)
    probes = np.zeros((len(idx), dv, dv), dtype=complex)
    for i, (r, c) in enumerate(idx):
        s = np.zeros((n, n))
        w = 1.0 if r == c else 1.0 / _SQRT2
        s[r, c] = w
        s[c, r] = w
        a = (s[:dv, :dv] + s[dv:, dv:]) / 2.0
        bl = s[dv:, :dv]
        b = (bl - bl.T) / 2.0
        probes[i] = a + 1j * b
    return probes


def _block_size(dim: int) -> int:
    return 1 if dim == 1 else 2 * dim


def _svec_len(size: int) -> int:
    return size * (size + 1) // 2


@dataclass
class RealBlock:
    name: str
    size: int
    psd: bool


@dataclass
class RealRow:
    coeffs: dict[str, np.ndarray]
    rhs: float
    meta: tuple  # (constraint name, "re"|"im", j, k)


@dataclass
class RealConicProblem:
    """Real symmetric conic problem in the solver's svec coordinates.

    ``rows`` are equalities; PSD blocks are constrained to the PSD cone
    by the adapter. The objective is always in minimize form.
    """

    blocks: list[RealBlock]
    rows: list[RealRow]
    objective: Optional[dict[str, np.ndarray]]
    obj_const: float
    negate_value: bool


@dataclass
class RealConicSolution:
    status: str            # raw solver termination string
    x: Optional[dict[str, np.ndarray]]
    row_duals: Optional[np.ndarray]
    obj_val: Optional[float]


def realify(p: SdpProblem) -> RealConicProblem:
    """Translate a Hermitian SDP into the real symmetric conic form."""
    blocks = [RealBlock(v.id, _block_size(v.dim), v.psd) for v in p.variables.values()]
    rows: list[RealRow] = []

    for con in p.constraints:
        e = con.expr.dim
        resid = con.rhs - con.expr.const
        # evaluated[vid][jk, i] = value of entry jk at probe i of block vid
        evaluated = {}
        for vid, t in con.expr.terms.items():
            dv = p.variables[vid].dim
            probes = _probe_tensor(dv)
            evaluated[vid] = t @ probes.reshape(probes.shape[0], dv * dv).T
        for j in range(e):
            for k in range(j, e):
                jk = j * e + k
                re_coeffs = {vid: o[jk].real.copy() for vid, o in evaluated.items()}
                rows.append(RealRow(re_coeffs, float(resid[j, k].real), (con.name, "re", j, k)))
                if k > j:
                    im_coeffs = {vid: o[jk].imag.copy() for vid, o in evaluated.items()}
                    rows.append(RealRow(im_coeffs, float(resid[j, k].imag), (con.name, "im", j, k)))

    objective = None
    obj_const = 0.0
    negate = p.sense == "maximize"
    if p.objective is not None:
        sign = -1.0 if negate else 1.0
        objective = {}
        for vid, w in p.objective.weights.items():
            dv = p.variables[vid].dim
            probes = _probe_tensor(dv)
            # tr[W X_probe_i] per probe gives the linear coefficients
            vals = np.einsum("ipq,qp->i", probes, w.astype(complex))
            objective[vid] = sign * vals.real
        obj_const = sign * p.objective.const

    return RealConicProblem(blocks, rows, objective, obj_const, negate)


# ---------------------------------------------------------------------------
# Solver adapter
# ---------------------------------------------------------------------------


class ConicAdapter(Protocol):
    """Narrow contract: real symmetric conic problem in, raw solution out."""

    def solve_conic(self, rp: RealConicProblem) -> RealConicSolution: ...


class ClarabelAdapter:
    """Drives the Clarabel interior-point solver.

    Row layout handed to the solver: equality rows (zero cone), then one
    nonnegative cone collecting all scalar PSD blocks, then one PSD
    triangle cone per matrix PSD block.
    """

    def __init__(self, tol: float = 1e-9, max_iter: int = 200, verbose: bool = False):
        self.tol = tol
        self.max_iter = max_iter
        self.verbose = verbose

    def solve_conic(self, rp: RealConicProblem) -> RealConicSolution:
        import clarabel
        from scipy import sparse

        offsets = {}
        total = 0
        for b in rp.blocks:
            offsets[b.name] = total
            total += _svec_len(b.size)

        n_eq = len(rp.rows)
        data, rows_idx, cols_idx = [], [], []
        b_vec = []
        for r, row in enumerate(rp.rows):
            for vid, coeffs in row.coeffs.items():
                off = offsets[vid]
                nz = np.nonzero(np.abs(coeffs) > 0.0)[0]
                for i in nz:
                    rows_idx.append(r)
                    cols_idx.append(off + int(i))
                    data.append(float(coeffs[i]))
            b_vec.append(row.rhs)

        cones = [clarabel.ZeroConeT(n_eq)] if n_eq else []
        cone_row = n_eq
        scalar_blocks = [b for b in rp.blocks if b.psd and b.size == 1]
        psd_blocks = [b for b in rp.blocks if b.psd and b.size > 1]
        for b in scalar_blocks:
            rows_idx.append(cone_row)
            cols_idx.append(offsets[b.name])
            data.append(-1.0)
            b_vec.append(0.0)
            cone_row += 1
        if scalar_blocks:
            cones.append(clarabel.NonnegativeConeT(len(scalar_blocks)))
        for b in psd_blocks:
            m = _svec_len(b.size)
            for i in range(m):
                rows_idx.append(cone_row)
                cols_idx.append(offsets[b.name] + i)
                data.append(-1.0)
                b_vec.append(0.0)
                cone_row += 1
            cones.append(clarabel.PSDTriangleConeT(b.size))

        a = sparse.csc_matrix(
            (data, (rows_idx, cols_idx)), shape=(cone_row, total)
        )
        b_arr = np.array(b_vec)
        q = np.zeros(total)
        if rp.objective:
            for vid, coeffs in rp.objective.items():
                q[offsets[vid]: offsets[vid] + len(coeffs)] = coeffs
        p_mat = sparse.csc_matrix((total, total))

        settings = clarabel.DefaultSettings()
        settings.verbose = self.verbose
        settings.max_iter = self.max_iter
        settings.tol_gap_abs = self.tol
        settings.tol_gap_rel = self.tol
        settings.tol_feas = self.tol

        solver = clarabel.DefaultSolver(p_mat, q, a, b_arr, cones, settings)
        sol = solver.solve()
        status = str(sol.status)

        x = None
        obj_val = None
        if status in ("Solved", "AlmostSolved"):
            xv = np.asarray(sol.x)
            x = {b.name: xv[offsets[b.name]: offsets[b.name] + _svec_len(b.size)].copy()
                 for b in rp.blocks}
            obj_val = float(sol.obj_val)
        row_duals = np.asarray(sol.z)[:n_eq].copy() if sol.z is not None else None
        return RealConicSolution(status, x, row_duals, obj_val)


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------


@dataclass
class SdpSolution:
    status: str                       # optimal | infeasible | unbounded | numerical-failure
    value: Optional[float]
    primal: dict[str, np.ndarray] = field(default_factory=dict)
    dual: dict[str, np.ndarray] = field(default_factory=dict)
    margin: Optional[float] = None    # feasibility-mode slack optimum
    solver_status: str = ""
    certificate_violation: Optional[float] = None

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


def _extract_complex(x_svec: np.ndarray, dim: int) -> np.ndarray:
    if dim == 1:
        return np.array([[x_svec[0]]], dtype=complex)
    s = smat(x_svec, 2 * dim)
    a = (s[:dim, :dim] + s[dim:, dim:]) / 2.0
    bl = s[dim:, :dim]
    b = (bl - bl.T) / 2.0
    return a + 1j * b


def _assemble_duals(p: SdpProblem, rp: RealConicProblem, z: np.ndarray) -> dict[str, np.ndarray]:
    dims = {c.name: c.expr.dim for c in p.constraints}
    duals = {name: np.zeros((d, d), dtype=complex) for name, d in dims.items()}
    for val, row in zip(z, rp.rows):
        name, kind, j, k = row.meta
        f = duals[name]
        if kind == "re":
            if j == k:
                f[j, j] += val
            else:
                f[j, k] += val / 2.0
                f[k, j] += val / 2.0
        else:
            f[j, k] += 1j * val / 2.0
            f[k, j] -= 1j * val / 2.0
    return duals


def _farkas_violation(p: SdpProblem, rp: RealConicProblem, z: np.ndarray) -> float:
    """Residual of the Farkas infeasibility certificate carried by z.

    For {x : rows(x) = b, psd blocks in cone}, infeasibility is certified
    by z with b'z < 0 and (A_eq)'z a member of each block's dual cone.
    Returns the worst violation after normalizing b'z to -1.
    """
    bz = float(sum(val * row.rhs for val, row in zip(z, rp.rows)))
    if bz >= 0:
        return math.inf
    zn = z / (-bz)
    worst = 0.0
    for blk in rp.blocks:
        m = _svec_len(blk.size)
        acc = np.zeros(m)
        for val, row in zip(zn, rp.rows):
            if blk.name in row.coeffs:
                acc += val * row.coeffs[blk.name]
        if blk.psd:
            if blk.size == 1:
                worst = max(worst, max(0.0, -acc[0]))
            else:
                eigs = np.linalg.eigvalsh(smat(acc, blk.size))
                worst = max(worst, max(0.0, -float(eigs[0])))
        else:
            worst = max(worst, float(np.max(np.abs(acc))) if m else 0.0)
    return worst


_STATUS_MAP = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
}


def _with_margin(p: SdpProblem) -> tuple[SdpProblem, bool]:
    """Slack transform: substitute X -> X' + s*Id for every PSD variable.

    X' keeps the PSD cone, so X ranges exactly over {X >= s Id}, and the
    optimal s is the best achievable smallest eigenvalue across all PSD
    variables. Returns the max-s problem plus a flag telling whether the
    margin actually couples to any constraint.
    """
    q = SdpProblem("maximize")
    for v in p.variables.values():
        q.add_var(v.id, v.dim, psd=v.psd)
    margin = q.add_var("_margin", 1, psd=False)
    coupled = False
    for con in p.constraints:
        expr = MatExpr(con.expr.dim, con.expr.terms, con.expr.const)
        extra = np.zeros((con.expr.dim, con.expr.dim), dtype=complex)
        for vid, t in con.expr.terms.items():
            v = p.variables[vid]
            if v.psd:
                eye_vec = np.eye(v.dim, dtype=complex).reshape(-1)
                extra += (t @ eye_vec).reshape(con.expr.dim, con.expr.dim)
        if np.max(np.abs(extra)) > 0:
            expr = expr + scalar_expr(margin, extra)
            coupled = True
        q.add_equality(con.name, expr, con.rhs)
    q.set_objective({"_margin": 1.0})
    return q, coupled


def solve(
    p: SdpProblem,
    adapter: Optional[ConicAdapter] = None,
    tol: Tolerances = DEFAULT_TOL,
) -> SdpSolution:
    """Solve a Hermitian SDP through realification and the conic adapter."""
    adapter = adapter or ClarabelAdapter()

    if p.sense == "feasibility":
        has_psd = any(v.psd for v in p.variables.values())
        if has_psd:
            q, coupled = _with_margin(p)
            if not coupled:
                raise SolverError("feasibility margin does not couple to any constraint")
            inner = solve(q, adapter=adapter, tol=tol)
            if inner.status == "infeasible":
                return SdpSolution("infeasible", None, dual=inner.dual,
                                   margin=-math.inf, solver_status=inner.solver_status,
                                   certificate_violation=inner.certificate_violation)
            if inner.status == "unbounded":
                return SdpSolution("optimal", math.inf, margin=math.inf,
                                   solver_status=inner.solver_status)
            if inner.status != "optimal":
                raise SolverError(f"solver failed: {inner.solver_status}", inner.solver_status)
            s_opt = float(inner.value)
            primal = {}
            for vid, v in p.variables.items():
                x = inner.primal[vid]
                primal[vid] = x + s_opt * np.eye(v.dim) if v.psd else x
            status = "optimal" if s_opt >= -tol.feas else "infeasible"
            return SdpSolution(status, s_opt, primal=primal, margin=s_opt,
                               solver_status=inner.solver_status)
        q = SdpProblem("minimize")
        q.variables = p.variables
        q.constraints = p.constraints
        q.set_objective({})
        out = solve(q, adapter=adapter, tol=tol)
        if out.status == "optimal":
            out.margin = math.inf
        return out

    rp = realify(p)
    raw = adapter.solve_conic(rp)
    status = _STATUS_MAP.get(raw.status, "numerical-failure")

    if status == "optimal":
        primal = {vid: _extract_complex(raw.x[vid], v.dim) for vid, v in p.variables.items()}
        duals = _assemble_duals(p, rp, raw.row_duals) if raw.row_duals is not None else {}
        v_min = raw.obj_val + rp.obj_const
        value = -v_min if rp.negate_value else v_min
        return SdpSolution("optimal", value, primal=primal, dual=duals,
                           solver_status=raw.status)
    if status == "infeasible":
        duals = {}
        violation = None
        if raw.row_duals is not None:
            duals = _assemble_duals(p, rp, raw.row_duals)
            violation = _farkas_violation(p, rp, raw.row_duals)
        return SdpSolution("infeasible", None, dual=duals, solver_status=raw.status,
                           certificate_violation=violation)
    if status == "unbounded":
        return SdpSolution("unbounded", None, solver_status=raw.status)
    raise SolverError(f"solver failed with status {raw.status}", raw.status)


def bisect_feasibility(
    family: Callable[[float], SdpProblem],
    lo: float,
    hi: float,
    tol: float,
    adapter: Optional[ConicAdapter] = None,
    tolerances: Tolerances = DEFAULT_TOL,
) -> float:
    """Boundary of a monotone feasible/infeasible family by bisection.

    Requires family(lo) feasible and family(hi) infeasible; returns the
    threshold within ``tol`` using at most ceil(log2((hi-lo)/tol)) + 2
    solves.
    """
    if not lo < hi:
        raise BracketError(f"bracket must satisfy lo < hi, got [{lo}, {hi}]")
    if not solve(family(lo), adapter=adapter, tol=tolerances).feasible:
        raise BracketError(f"family must be feasible at lo={lo}")
    if solve(family(hi), adapter=adapter, tol=tolerances).feasible:
        raise BracketError(f"family must be infeasible at hi={hi}")
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if solve(family(mid), adapter=adapter, tol=tolerances).feasible:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


# ---------------------------------------------------------------------------
# Debug dump
# ---------------------------------------------------------------------------


def problem_to_json(p: SdpProblem) -> dict:
    """Documented JSON schema for external reproduction of a problem.

    Superoperators are emitted as sparse triplets [row, col, re, im]
    acting on the row-major vectorization of each variable.
    """
    def triplets(t: np.ndarray) -> list:
        out = []
        for r, c in zip(*np.nonzero(np.abs(t) > 0)):
            out.append([int(r), int(c), float(t[r, c].real), float(t[r, c].imag)])
        return out

    from .linalg import matrix_to_json

    doc = {
        "sense": p.sense,
        "variables": [
            {"id": v.id, "dim": v.dim, "psd": v.psd} for v in p.variables.values()
        ],
        "constraints": [
            {
                "name": c.name,
                "dim": c.expr.dim,
                "terms": [
                    {"var": vid, "triplets": triplets(t)} for vid, t in c.expr.terms.items()
                ],
                "const": matrix_to_json(c.expr.const),
                "rhs": matrix_to_json(c.rhs),
            }
            for c in p.constraints
        ],
    }
    if p.objective is not None:
        doc["objective"] = {
            "weights": {vid: matrix_to_json(w) for vid, w in p.objective.weights.items()},
            "const": p.objective.const,
        }
    return doc
