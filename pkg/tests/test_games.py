import numpy as np
import pytest
from numpy.testing import assert_allclose

from incompat.allowed_ops import identity_ao, random_ao
from incompat.channels import (
    depolarising,
    identity_channel,
    random_channel,
    random_filter,
)
from incompat.errors import InvalidParameterError, InvalidShapeError
from incompat.games import (
    conversion_falsifier,
    game_lb,
    gamma_reduce,
    ia_denominator,
    phi_plus_filter,
    pmax_search,
    score,
    witness_bound,
)
from incompat.linalg import psd_sqrt
from incompat.objects import Filter
from incompat.preservability import (
    eb_robustness_ub,
    restricted_robustness_lb,
    restricted_robustness_sdp,
)

PHI_DEN_XYZ = (np.sqrt(3) + 1) / 4  # relaxed-set optimum attained by depolarising noise


class TestScore:
    def test_identity_with_phi_filter(self, identity_qubit):
        assert score(identity_qubit, phi_plus_filter(2)).value == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, 0.3, 0.8, 1.0])
    def test_depolarising_scores_singlet_fraction(self, p):
        s = score(depolarising(p, 2), phi_plus_filter(2)).value
        assert s == pytest.approx((3 * p + 1) / 4, abs=1e-12)

    def test_trivial_filter_scores_one(self, rng):
        triv = Filter(4, (np.eye(4, dtype=complex),), kind="f1")
        n = random_channel(2, kraus_rank=3, rng=rng)
        assert score(n, triv).value == pytest.approx(1.0, abs=1e-10)

    def test_recomputable_from_choi(self, rng):
        n = random_channel(2, kraus_rank=2, rng=rng)
        k = random_filter(4, rng=rng)
        s = score(n, k)
        recomputed = np.trace(k.adjoint(np.eye(4)) @ n.choi).real
        assert s.value == pytest.approx(min(max(recomputed, 0.0), 1.0), abs=1e-10)

    def test_dimension_check(self):
        with pytest.raises(InvalidShapeError):
            score(identity_channel(2), Filter(2, (np.eye(2, dtype=complex),)))


class TestGammaReduce:
    def test_f1_idempotent(self):
        k = phi_plus_filter(2)
        g = gamma_reduce(k)
        assert g.kind == "f1"
        assert_allclose(g.kraus[0], k.kraus[0], atol=1e-12)

    def test_zero_filter(self):
        z = gamma_reduce(Filter(4, ()))
        assert_allclose(z.kraus[0], np.zeros((4, 4)), atol=1e-14)
        assert score(identity_channel(2), z).value == 0.0

    @pytest.mark.parametrize("seed", range(30))
    def test_score_identity(self, seed):
        rng = np.random.default_rng(seed)
        n = random_channel(2, kraus_rank=3, rng=rng)
        k = random_filter(4, kraus_rank=3, rng=rng)
        s1 = score(n, k).value
        s2 = score(n, gamma_reduce(k)).value
        assert abs(s1 - s2) <= 1e-9

    def test_spectrum_in_unit_interval(self, rng):
        k = random_filter(4, rng=rng)
        g = gamma_reduce(k)
        eigs = np.linalg.eigvalsh(g.kraus[0])
        assert eigs[0] >= -1e-12
        assert eigs[-1] <= 1.0 + 1e-12


class TestIaDenominator:
    def test_phi_filter_value(self, xyz):
        den = ia_denominator(phi_plus_filter(2), xyz)
        assert den == pytest.approx(PHI_DEN_XYZ, abs=1e-4)
        assert den >= 5 / 8  # the relaxation can only exceed the true free optimum

    def test_identity_filter(self, xyz):
        triv = Filter(4, (np.eye(4, dtype=complex),), kind="f1")
        assert ia_denominator(triv, xyz) == pytest.approx(1.0, abs=1e-7)

    def test_requires_f1(self, xyz, rng):
        with pytest.raises(InvalidParameterError):
            ia_denominator(random_filter(4, rng=rng), xyz)

    def test_phi_filter_value_d3(self):
        # twirl argument: the optimum over the MUB-relaxed set is the
        # depolarising point at the MUB visibility threshold
        from incompat.jm import jm_visibility, mub_assemblage
        from incompat.preservability import ProbeFamily

        probes3 = ProbeFamily((mub_assemblage(3),))
        den = ia_denominator(phi_plus_filter(3), probes3)
        v = jm_visibility(mub_assemblage(3))
        assert den == pytest.approx(v + (1 - v) / 9, abs=1e-4)


class TestGameLb:
    def test_identity_ratio(self, identity_qubit, xyz):
        gb = game_lb(identity_qubit, phi_plus_filter(2), xyz)
        assert gb.ratio_lb == pytest.approx(1 / PHI_DEN_XYZ, abs=1e-3)
        assert gb.ratio_lb <= 2.0  # consistent with 1 + R in [1.6, 2]

    def test_free_channel_certifies_nothing(self, xyz):
        gb = game_lb(depolarising(0.5, 2), phi_plus_filter(2), xyz)
        assert gb.ratio_lb <= 1.0 + 1e-6

    def test_analytic_denominator(self, identity_qubit):
        gb = game_lb(identity_qubit, phi_plus_filter(2), denominator="analytic")
        assert gb.ratio_lb == pytest.approx(8 / 5, abs=1e-9)
        assert gb.denominator_method == "analytic-5/8"

    def test_analytic_mode_rejects_other_filters(self, identity_qubit):
        triv = Filter(4, (np.eye(4, dtype=complex),), kind="f1")
        with pytest.raises(InvalidParameterError):
            game_lb(identity_qubit, triv, denominator="analytic")

    def test_lower_bound_below_eb_upper(self, xyz):
        for seed in range(5):
            n = random_channel(2, kraus_rank=2, seed=500 + seed)
            gb = game_lb(n, phi_plus_filter(2), xyz)
            assert gb.ratio_lb - 1.0 <= eb_robustness_ub(n) + 1e-5


class TestWitnessBound:
    def test_identity_duality(self, identity_qubit, xyz):
        res = restricted_robustness_sdp(identity_qubit, xyz)
        gb = witness_bound(identity_qubit, xyz, _precomputed=res)
        assert gb.ratio_lb == pytest.approx(1.0 + res.value, abs=1e-5)

    def test_free_channel(self, xyz):
        gb = witness_bound(depolarising(0.5, 2), xyz)
        assert gb.ratio_lb == pytest.approx(1.0, abs=1e-5)

    def test_depolarising_09_xz(self, xz):
        ch = depolarising(0.9, 2)
        lb = restricted_robustness_lb(ch, xz)
        gb = witness_bound(ch, xz)
        assert gb.ratio_lb > 1.0
        assert gb.ratio_lb <= 1.0 + 0.8 + 1e-5  # exact upper max{0, 2p-1} at p=0.9
        assert gb.ratio_lb == pytest.approx(1.0 + lb, abs=1e-5)

    @pytest.mark.parametrize("seed", range(5))
    def test_duality_on_random_channels(self, seed, xyz):
        n = random_channel(2, kraus_rank=2, seed=600 + seed)
        res = restricted_robustness_sdp(n, xyz)
        gb = witness_bound(n, xyz, _precomputed=res)
        assert gb.ratio_lb == pytest.approx(1.0 + res.value, abs=1e-5)

    def test_duality_multi_probe_family(self, xz, xyz):
        from incompat.preservability import ProbeFamily

        fam = ProbeFamily((xz.probes[0], xyz.probes[0]))
        n = depolarising(0.85, 2)
        res = restricted_robustness_sdp(n, fam)
        gb = witness_bound(n, fam, _precomputed=res)
        assert gb.ratio_lb == pytest.approx(1.0 + res.value, abs=1e-5)

    def test_duality_at_d3(self):
        from incompat.jm import mub_assemblage
        from incompat.preservability import ProbeFamily

        probes3 = ProbeFamily((mub_assemblage(3),))
        ident3 = identity_channel(3)
        res = restricted_robustness_sdp(ident3, probes3)
        gb = witness_bound(ident3, probes3, _precomputed=res)
        assert gb.ratio_lb == pytest.approx(1.0 + res.value, abs=1e-5)


class TestScoreMonotonicity:
    def test_dominated_filters_score_less(self, rng):
        # build K1 <= K2 in operator order: K2 = K1 + PSD bump, rescaled into [0, Id]
        base = random_filter(4, rng=rng)
        op1 = gamma_reduce(base).kraus[0]
        op1 = op1 @ op1
        g = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
        bump = g @ np.diag(rng.uniform(0, 0.5, 4)) @ g.conj().T
        op2 = op1 + bump
        top = np.max(np.linalg.eigvalsh(op2))
        op1, op2 = op1 / top, op2 / top
        k1 = Filter(4, (psd_sqrt(op1),), kind="f1")
        k2 = Filter(4, (psd_sqrt(op2),), kind="f1")
        for seed in range(5):
            n = random_channel(2, kraus_rank=2, seed=700 + seed)
            assert score(n, k1).value <= score(n, k2).value + 1e-10


class TestPmaxSearch:
    def test_identity_bank_matches_score(self, identity_qubit):
        k = phi_plus_filter(2)
        assert pmax_search(identity_qubit, k, [identity_ao(2)]) == pytest.approx(
            score(identity_qubit, k).value
        )

    def test_never_below_plain_score(self):
        k = phi_plus_filter(2)
        bank = [random_ao(s) for s in range(10)]
        for seed in range(3):
            n = random_channel(2, kraus_rank=2, seed=800 + seed)
            assert pmax_search(n, k, bank) >= score(n, k).value - 1e-12

    def test_identity_channel_saturates(self):
        k = phi_plus_filter(2)
        bank = [random_ao(s) for s in range(200)]
        val = pmax_search(identity_channel(2), k, bank)
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_default_bank(self):
        k = phi_plus_filter(2)
        n = depolarising(0.6, 2)
        assert pmax_search(n, k) >= score(n, k).value - 1e-12


class TestConversionFalsifier:
    def test_same_channel_no_obstruction(self):
        n = depolarising(0.7, 2)
        v = conversion_falsifier(n, n, [phi_plus_filter(2)], [random_ao(0)])
        assert not v.obstructed

    def test_reachable_target_no_obstruction(self):
        bank = [random_ao(s) for s in range(5)]
        n = random_channel(2, kraus_rank=2, seed=900)
        from incompat.allowed_ops import apply_ao

        m = apply_ao(bank[2], n)
        v = conversion_falsifier(n, m, [phi_plus_filter(2)], bank)
        assert not v.obstructed

    def test_free_source_obstructed(self):
        v = conversion_falsifier(
            depolarising(0.4, 2), identity_channel(2), [phi_plus_filter(2)],
            [random_ao(s) for s in range(5)],
        )
        assert v.obstructed
        assert v.verdict == "candidate-obstruction"
