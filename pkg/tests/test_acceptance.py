"""Acceptance suite: one test per criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the line per
criterion. Tolerances are pinned here and nowhere else; the whole module
is expected to finish in well under five minutes.
"""

import time

import numpy as np
import pytest

from incompat.allowed_ops import apply_ao, golden_rule_check, jm_parents_for, parent_after_ao, random_ao
from incompat.channels import depolarising, identity_channel, measure_z_prepare, random_channel
from incompat.games import gamma_reduce, phi_plus_filter, score, witness_bound
from incompat.jm import jm_decide, jm_visibility, jm_visibility_bisect, mub_assemblage, pauli_assemblage
from incompat.channels import random_filter
from incompat.objects import Filter
from incompat.preservability import (
    ProbeFamily,
    depolarising_report,
    eb_robustness_ub,
    mub_factor,
    restricted_robustness_lb,
    restricted_robustness_sdp,
    sf_lower_bounds,
    xyz_probes,
    xz_probes,
)

GRID = [round(0.05 * i, 10) for i in range(21)]


def _report(num: int, desc: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num:2d}] {status}  {desc}" + (f"  ({detail})" if detail else ""))
    assert ok, f"criterion {num}: {desc} {detail}"


def test_criterion_01_pauli_incompatible():
    t0 = time.perf_counter()
    verdict = jm_decide(pauli_assemblage())
    elapsed = time.perf_counter() - t0
    _report(1, "Pauli X/Z assemblage is incompatible in under a second",
            (not verdict.jm) and elapsed < 1.0, f"margin {verdict.margin:+.2e}, {elapsed:.2f}s")


def test_criterion_02_visibility_thresholds():
    xz_direct = jm_visibility(pauli_assemblage())
    xyz_direct = jm_visibility(pauli_assemblage(include_y=True))
    xz_bisect = jm_visibility_bisect(pauli_assemblage(), tol=1e-5)
    xyz_bisect = jm_visibility_bisect(pauli_assemblage(include_y=True), tol=1e-5)
    ok = (
        abs(xz_direct - 0.70711) <= 1e-4
        and abs(xyz_direct - 0.57735) <= 1e-4
        and abs(xz_direct - xz_bisect) <= 2e-4
        and abs(xyz_direct - xyz_bisect) <= 2e-4
    )
    _report(2, "visibility thresholds 0.70711 (XZ) and 0.57735 (XYZ), both methods",
            ok, f"direct ({xz_direct:.5f}, {xyz_direct:.5f})")


def test_criterion_03_depolarising_membership_consistency():
    probes2 = xyz_probes(2)
    ok = True
    worst = 0.0
    for p in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]:
        ch = depolarising(p, 2)
        res = restricted_robustness_sdp(ch, probes2)
        wit = witness_bound(ch, probes2, _precomputed=res)
        lows = [res.value, sf_lower_bounds(ch).lower, max(0.0, wit.ratio_lb - 1.0)]
        worst = max(worst, *lows)
        ok &= all(low <= 1e-6 for low in lows)
    rep3 = depolarising_report(0.3, 3)
    ok &= abs(rep3.ia_threshold - 5 / 12) < 1e-12
    probes3 = ProbeFamily((mub_assemblage(3),))
    for p in [0.2, 0.4]:
        lb = restricted_robustness_lb(depolarising(p, 3), probes3)
        ok &= lb <= 1e-6
    _report(3, "free depolarising channels get zero lower bounds (d=2 and d=3, threshold 5/12)",
            ok, f"worst lower bound {worst:.2e}")


def test_criterion_04_sandwich_reproduction():
    probes = xyz_probes(2)
    ok = True
    for p in GRID:
        ch = depolarising(p, 2)
        hi = max(0.0, 2 * p - 1)
        lb_probe = restricted_robustness_lb(ch, probes)
        lb_sf = sf_lower_bounds(ch).lower
        ub = eb_robustness_ub(ch)
        ok &= lb_probe <= hi + 1e-6 and lb_sf <= hi + 1e-6
        ok &= ub >= 0.6 * hi - 1e-6
        ok &= lb_probe <= ub + 1e-6 and lb_sf <= ub + 1e-6
    sf_one = sf_lower_bounds(depolarising(1.0, 2)).lower
    ub_one = eb_robustness_ub(depolarising(1.0, 2))
    ok &= abs(sf_one - 0.6) <= 1e-9 and abs(ub_one - 1.0) <= 1e-6
    _report(4, "robustness sandwich 3/5 max{0,2p-1} <= R <= max{0,2p-1} on the grid",
            ok, f"at p=1: [{sf_one:.9f}, {ub_one:.7f}]")


def test_criterion_05_singlet_fraction_formulas():
    from incompat.channels import singlet_fraction

    ok = all(
        abs(singlet_fraction(depolarising(p, 2)) - (3 * p + 1) / 4) <= 1e-10 for p in GRID
    )
    factor2 = mub_factor(2)
    target = 2 * np.sqrt(3) / (1 + np.sqrt(3))
    ok &= abs(factor2 - target) <= 1e-12 and factor2 < 8 / 5
    fires = lambda p: sf_lower_bounds(depolarising(p, 2)).certifies_preservability
    ok &= not fires(0.5) and fires(0.5 + 1e-6) and not fires(0.5 - 1e-6)
    _report(5, "singlet fraction (3p+1)/4, MUB factor dominated by 8/5, threshold p=1/2",
            ok, f"mub factor {factor2:.6f}")


def test_criterion_06_gamma_reduction_identity():
    worst = 0.0
    for seed in range(30):
        rng = np.random.default_rng(seed)
        n = random_channel(2, kraus_rank=3, rng=rng)
        k = random_filter(4, kraus_rank=3, rng=rng)
        worst = max(worst, abs(score(n, k).value - score(n, gamma_reduce(k)).value))
    zero = gamma_reduce(Filter(4, ()))
    exact_zero = score(identity_channel(2), zero).value == 0.0
    phi = phi_plus_filter(2)
    idem = np.array_equal(gamma_reduce(phi).kraus[0], phi.kraus[0]) or \
        np.max(np.abs(gamma_reduce(phi).kraus[0] - phi.kraus[0])) < 1e-12
    _report(6, "gamma reduction preserves scores (30 seeded pairs) with exact edge cases",
            worst <= 1e-9 and exact_zero and idem, f"worst residual {worst:.2e}")


def test_criterion_07_golden_rule():
    probes = xyz_probes(2)
    bases = [measure_z_prepare(2), depolarising(0.3, 2), depolarising(1 / 3, 2)]
    worst = np.inf
    failures = 0
    for seed in range(50):
        ao = random_ao(seed)
        for base in bases:
            rep = golden_rule_check(ao, base, probes, warrant="ppt")
            worst = min(worst, rep.worst_margin)
            failures += 0 if rep.passed else 1
    _report(7, "golden rule: 50 operations x 3 EB channels keep pushforwards compatible",
            failures == 0 and worst >= -1e-7, f"worst margin {worst:+.2e}")


def test_criterion_08_parent_construction():
    probe = xz_probes().probes[0]
    bases = [measure_z_prepare(2), depolarising(0.3, 2), depolarising(1 / 3, 2)]
    worst = 0.0
    povm_ok = True
    for seed in range(20):
        ao = random_ao(seed + 1000)
        base = bases[seed % 3]
        parents = jm_parents_for(ao, base, probe)
        w, parent = parent_after_ao(ao, probe, parents)
        worst = max(worst, parent.reconstruction_residual(w))
        total = sum(parent.effects)
        povm_ok &= np.max(np.abs(total - np.eye(2))) <= 1e-7
        povm_ok &= all(np.min(np.linalg.eigvalsh(g)) >= -1e-8 for g in parent.effects)
    _report(8, "constructed parent POVM reproduces the post-operation assemblage (20 trials)",
            worst <= 1e-8 and povm_ok, f"worst residual {worst:.2e}")


def test_criterion_09_witness_duality():
    probes = xyz_probes(2)
    tests = [identity_channel(2), depolarising(0.9, 2)]
    tests += [random_channel(2, kraus_rank=2, seed=7000 + i) for i in range(5)]
    worst = 0.0
    for ch in tests:
        res = restricted_robustness_sdp(ch, probes)
        gb = witness_bound(ch, probes, _precomputed=res)
        worst = max(worst, abs(gb.ratio_lb - 1.0 - res.value))
    _report(9, "dual-witness filter reproduces the restricted robustness (7 channels)",
            worst <= 1e-5, f"worst duality gap {worst:.2e}")


def test_criterion_10_monotonicity_shadows():
    probes = xyz_probes(2)
    ok = True
    worst_increase = -np.inf
    for seed in range(30):
        ao = random_ao(seed + 2000)
        n = random_channel(2, kraus_rank=2, seed=3000 + seed)
        ub_before = eb_robustness_ub(n)
        image = apply_ao(ao, n)
        ub_after = eb_robustness_ub(image)
        worst_increase = max(worst_increase, ub_after - ub_before)
        ok &= ub_after <= ub_before + 1e-6
        # cross-bound ordering for every channel touched here
        ok &= restricted_robustness_lb(n, probes) <= ub_before + 1e-6
        ok &= restricted_robustness_lb(image, probes) <= ub_after + 1e-6
    _report(10, "EB upper bound is monotone under allowed operations (30 samples)",
            ok, f"worst increase {worst_increase:+.2e}")


def test_criterion_11_eb_anchors():
    ub_id = eb_robustness_ub(identity_channel(2))
    ok = abs(ub_id - 1.0) <= 1e-6
    worst = abs(ub_id - 1.0)
    for p in GRID:
        ub = eb_robustness_ub(depolarising(p, 2))
        expected = max(0.0, (3 * p - 1) / 2)
        worst = max(worst, abs(ub - expected))
        ok &= abs(ub - expected) <= 1e-5
    _report(11, "EB bound anchors: identity -> 1, depolarising -> max{0,(3p-1)/2}",
            ok, f"worst deviation {worst:.2e}")
