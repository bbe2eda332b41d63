import numpy as np
import pytest
from numpy.testing import assert_allclose

from incompat import sdp
from incompat.errors import BracketError, InvalidShapeError
from incompat.linalg import dagger, ginibre
from incompat.sdp import (
    SdpProblem,
    const_expr,
    problem_to_json,
    realify,
    smat,
    sop_trace,
    superop_expr,
    svec,
    var_expr,
)


def _trace_one_problem(objective: np.ndarray) -> SdpProblem:
    d = objective.shape[0]
    p = SdpProblem("maximize")
    x = p.add_var("X", d, psd=True)
    p.add_equality("trace", superop_expr(x, sop_trace(d), 1), 1.0)
    p.set_objective({"X": objective})
    return p


class TestSvec:
    def test_round_trip(self, rng):
        m = rng.standard_normal((5, 5))
        m = (m + m.T) / 2
        assert_allclose(smat(svec(m), 5), m, atol=1e-14)

    def test_inner_product_isometry(self, rng):
        a = rng.standard_normal((4, 4))
        a = (a + a.T) / 2
        b = rng.standard_normal((4, 4))
        b = (b + b.T) / 2
        assert np.trace(a @ b) == pytest.approx(svec(a) @ svec(b))


class TestStatedExamples:
    def test_rank_one_projector(self):
        sol = sdp.solve(_trace_one_problem(np.diag([1.0, 0.0])))
        assert sol.status == "optimal"
        assert sol.value == pytest.approx(1.0, abs=1e-8)

    def test_real_part_off_diagonal(self):
        # max Re X01 over the Bloch ball cross-section -> 1/2
        sol = sdp.solve(_trace_one_problem(np.array([[0, 0.5], [0.5, 0]])))
        assert sol.value == pytest.approx(0.5, abs=1e-8)

    def test_negative_trace_infeasible(self):
        p = SdpProblem("feasibility")
        x = p.add_var("X", 2, psd=True)
        p.add_equality("trace", superop_expr(x, sop_trace(2), 1), -1.0)
        sol = sdp.solve(p)
        assert sol.status == "infeasible"
        assert sol.margin == pytest.approx(-0.5, abs=1e-8)


class TestSolutionQuality:
    def test_primal_feasibility_of_optimal(self):
        sol = sdp.solve(_trace_one_problem(np.array([[0.3, 0.1j], [-0.1j, -0.2]])))
        x = sol.primal["X"]
        assert np.trace(x).real == pytest.approx(1.0, abs=1e-7)
        assert np.min(np.linalg.eigvalsh(x)) > -1e-8

    def test_complex_objective(self):
        # max Im X01: weight with tr[W X] = Im X01
        w = np.array([[0, 0.5j], [-0.5j, 0]])
        sol = sdp.solve(_trace_one_problem(w))
        assert sol.value == pytest.approx(0.5, abs=1e-8)
        assert sol.primal["X"][0, 1].imag == pytest.approx(0.5, abs=1e-7)

    def test_minimize_sense(self):
        p = SdpProblem("minimize")
        x = p.add_var("X", 2, psd=True)
        p.add_equality("trace", superop_expr(x, sop_trace(2), 1), 1.0)
        p.set_objective({"X": np.diag([1.0, 3.0])})
        sol = sdp.solve(p)
        assert sol.value == pytest.approx(1.0, abs=1e-8)


class TestDualConvention:
    def test_equality_multiplier_sign(self):
        # min t s.t. t = 5: L = t + z (t - 5) is stationary at z = -1
        p = SdpProblem("minimize")
        t = p.add_var("t", 1, psd=False)
        p.add_equality("pin", var_expr(t), 5.0)
        p.set_objective({"t": 1.0})
        sol = sdp.solve(p)
        assert sol.value == pytest.approx(5.0, abs=1e-8)
        assert sol.dual["pin"][0, 0].real == pytest.approx(-1.0, abs=1e-7)

    def test_matrix_constraint_dual_is_hermitian(self):
        p = SdpProblem("minimize")
        x = p.add_var("X", 2, psd=True)
        target = np.array([[0.6, 0.2 + 0.1j], [0.2 - 0.1j, 0.4]])
        p.add_equality("pin", var_expr(x), target)
        p.set_objective({"X": np.eye(2)})
        sol = sdp.solve(p)
        f = sol.dual["pin"]
        assert np.max(np.abs(f - dagger(f))) < 1e-12


class TestRealifySoundness:
    """The realified path must reproduce a hand-realified reference.

    The reference builds the doubled real-symmetric problem directly in
    cvxpy: S = [[A, -B], [B, A]] >> 0 with tr[R(W) S] / 2 as objective
    and constraints, bypassing this package's realification entirely.
    """

    @staticmethod
    def _random_instance(seed: int, d: int):
        r = np.random.default_rng(seed)
        g = ginibre(r, d, d)
        w = (g + dagger(g)) / 2
        g2 = ginibre(r, d, d)
        a = (g2 + dagger(g2)) / 2
        x0 = ginibre(r, d, d)
        x0 = x0 @ dagger(x0)
        x0 /= np.trace(x0).real
        b = float(np.trace(a @ x0).real)
        return w, a, b

    @staticmethod
    def _reference_value(w: np.ndarray, a: np.ndarray, b: float) -> float:
        import cvxpy as cp

        d = w.shape[0]

        def doubled(m):
            return np.block([[m.real, -m.imag], [m.imag, m.real]])

        s = cp.Variable((2 * d, 2 * d), symmetric=True)
        cons = [
            s >> 0,
            cp.trace(doubled(np.eye(d, dtype=complex)) @ s) / 2 == 1,
            cp.trace(doubled(a) @ s) / 2 == b,
        ]
        prob = cp.Problem(cp.Maximize(cp.trace(doubled(w) @ s) / 2), cons)
        prob.solve(solver="CLARABEL")
        return float(prob.value)

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_reference(self, seed):
        d = 2 + seed % 3  # dimensions 2..4
        w, a, b = self._random_instance(seed, d)
        p = SdpProblem("maximize")
        x = p.add_var("X", d, psd=True)
        p.add_equality("trace", superop_expr(x, sop_trace(d), 1), 1.0)
        p.add_equality("pin", superop_expr(x, (a.conj().reshape(1, -1)), 1), b)
        p.set_objective({"X": w})
        mine = sdp.solve(p).value
        ref = self._reference_value(w, a, b)
        assert mine == pytest.approx(ref, abs=1e-7)

    def test_complex_formulation_cross_check(self):
        import cvxpy as cp

        w, a, b = self._random_instance(123, 3)
        x = cp.Variable((3, 3), hermitian=True)
        prob = cp.Problem(
            cp.Maximize(cp.real(cp.trace(w @ x))),
            [x >> 0, cp.real(cp.trace(x)) == 1, cp.real(cp.trace(a @ x)) == b],
        )
        prob.solve(solver="CLARABEL")
        p = SdpProblem("maximize")
        xv = p.add_var("X", 3, psd=True)
        p.add_equality("trace", superop_expr(xv, sop_trace(3), 1), 1.0)
        p.add_equality("pin", superop_expr(xv, (a.conj().reshape(1, -1)), 1), b)
        p.set_objective({"X": w})
        assert sdp.solve(p).value == pytest.approx(float(prob.value), abs=1e-7)

    def test_block_structure(self):
        p = _trace_one_problem(np.diag([1.0, 0.0]))
        rp = realify(p)
        assert [(b.name, b.size, b.psd) for b in rp.blocks] == [("X", 4, True)]
        assert len(rp.rows) == 1  # scalar constraint: one real row


class TestHermiticityValidation:
    def test_rejects_non_hermitian_rhs(self):
        p = SdpProblem("feasibility")
        x = p.add_var("X", 2, psd=True)
        with pytest.raises(InvalidShapeError):
            p.add_equality("bad", var_expr(x), np.array([[0, 1], [0, 0]]))

    def test_rejects_non_hermiticity_preserving_map(self):
        p = SdpProblem("feasibility")
        x = p.add_var("X", 2, psd=True)
        t = np.zeros((4, 4), dtype=complex)
        t[0, 1] = 1.0  # output[0,0] = X[0,1]: not Hermitian for Hermitian X
        with pytest.raises(InvalidShapeError):
            p.add_equality("bad", superop_expr(x, t, 2), np.zeros((2, 2)))

    def test_rejects_unknown_variable(self):
        p = SdpProblem("feasibility")
        q = SdpProblem("feasibility")
        x = q.add_var("X", 2, psd=True)
        with pytest.raises(InvalidShapeError):
            p.add_equality("bad", var_expr(x), np.zeros((2, 2)))


class TestInfeasibilityCertificate:
    def test_farkas_ray_verifies(self):
        p = SdpProblem("feasibility")
        x = p.add_var("X", 2, psd=False)
        p.add_equality("t1", superop_expr(x, sop_trace(2), 1), 1.0)
        p.add_equality("t2", superop_expr(x, sop_trace(2), 1), -1.0)
        sol = sdp.solve(p)
        assert sol.status == "infeasible"
        assert sol.certificate_violation is not None
        assert sol.certificate_violation <= 1e-6


class TestBisection:
    def test_threshold_location(self):
        calls = []

        def family(c):
            calls.append(c)
            p = SdpProblem("feasibility")
            t = p.add_var("t", 1, psd=True)
            p.add_equality("pin", var_expr(t), 0.3 - c)  # feasible iff c <= 0.3
            return p

        val = sdp.bisect_feasibility(family, 0.0, 1.0, 1e-4)
        assert val == pytest.approx(0.3, abs=1e-4)
        assert len(calls) <= int(np.ceil(np.log2(1.0 / 1e-4))) + 2

    def test_bracket_errors(self):
        def family(c):
            p = SdpProblem("feasibility")
            t = p.add_var("t", 1, psd=True)
            p.add_equality("pin", var_expr(t), 0.3 - c)
            return p

        with pytest.raises(BracketError):
            sdp.bisect_feasibility(family, 1.0, 0.0, 1e-4)  # reversed
        with pytest.raises(BracketError):
            sdp.bisect_feasibility(family, 0.0, 0.2, 1e-4)  # both feasible
        with pytest.raises(BracketError):
            sdp.bisect_feasibility(family, 0.5, 1.0, 1e-4)  # both infeasible


class TestFeasibilityMargins:
    def test_strict_interior_has_positive_margin(self):
        p = SdpProblem("feasibility")
        x = p.add_var("X", 2, psd=True)
        p.add_equality("trace", superop_expr(x, sop_trace(2), 1), 1.0)
        sol = sdp.solve(p)
        assert sol.feasible
        assert sol.margin == pytest.approx(0.5, abs=1e-7)  # X = Id/2 maximizes min eig

    def test_margin_with_lmi(self):
        # X >= 0, tr X = 1, and Id/4 - X >= 0 forces eigenvalues near 1/4
        p = SdpProblem("feasibility")
        x = p.add_var("X", 2, psd=True)
        p.add_equality("trace", superop_expr(x, sop_trace(2), 1), 1.0)
        p.add_lmi("cap", const_expr(np.eye(2) * 0.4) - var_expr(x))
        sol = sdp.solve(p)
        # margin limited by the LMI slack: X = diag(.6,.4) violates; best is
        # X = Id/2 with cap slack -0.1, so the problem is infeasible by 0.1
        assert not sol.feasible
        assert sol.margin == pytest.approx(-0.1, abs=1e-6)


class TestJsonDump:
    def test_schema_fields(self):
        p = _trace_one_problem(np.diag([1.0, 0.0]))
        doc = problem_to_json(p)
        assert doc["sense"] == "maximize"
        assert doc["variables"] == [{"id": "X", "dim": 2, "psd": True}]
        assert doc["constraints"][0]["name"] == "trace"
        assert "objective" in doc
        triplets = doc["constraints"][0]["terms"][0]["triplets"]
        assert [t[:2] for t in triplets] == [[0, 0], [0, 3]]
