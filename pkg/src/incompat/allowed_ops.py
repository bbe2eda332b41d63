"""Allowed operations: pre-instrument, conditioned post-channels, mixing.

An allowed operation maps a channel N to

    sum_mu p_mu sum_k D_{k|mu} o N o F_{k|mu},

where for each mu the filters {F_{k|mu}}_k form an instrument (their sum
is trace preserving) and the D_{k|mu} are channels. These operations can
never create the ability to preserve incompatibility; the golden-rule
checker and the constructive parent-POVM machinery below exercise that
claim end to end.

Zero-probability branches are represented as filters with empty Kraus
lists and skipped during composition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import (
    InvalidCertificateError,
    InvalidShapeError,
    UncheckedPremiseError,
)
from . import sdp
from .channels import heisenberg, random_channel
from .jm import ParentPOVM, deterministic_responses, jm_decide
from .linalg import is_psd, partial_transpose
from .objects import Channel, Effect, Filter, MeasurementAssemblage
from .preservability import IaCertificateReport, ProbeFamily, probe_ia_test


@dataclass(frozen=True)
class Instrument:
    """A list of filters whose branch sum is a channel."""

    branches: tuple[Filter, ...]
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        if not self.branches:
            raise InvalidShapeError("instrument needs at least one branch")
        d = self.branches[0].dim
        total = np.zeros((d, d), dtype=complex)
        for f in self.branches:
            if f.dim != d:
                raise InvalidShapeError("instrument branches must share one dimension")
            total += f.completeness()
        if np.max(np.abs(total - np.eye(d))) > self.tol.tp:
            raise InvalidShapeError("instrument branch sum is not trace preserving")

    @property
    def dim(self) -> int:
        return self.branches[0].dim


@dataclass(frozen=True)
class AllowedOperation:
    """weights p_mu, one instrument per mu, one post-channel per branch."""

    weights: tuple[float, ...]
    instruments: tuple[Instrument, ...]
    post_channels: tuple[tuple[Channel, ...], ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidShapeError("weights must be a probability vector")
        if not (len(self.weights) == len(self.instruments) == len(self.post_channels)):
            raise InvalidShapeError("need one instrument and post-channel list per mu")
        d = self.instruments[0].dim
        for inst, posts in zip(self.instruments, self.post_channels):
            if inst.dim != d:
                raise InvalidShapeError("instruments must share one dimension")
            if len(posts) != len(inst.branches):
                raise InvalidShapeError("need one post-channel per instrument branch")
            for ch in posts:
                if ch.dim_in != d or ch.dim_out != d:
                    raise InvalidShapeError("post-channels must act on the same dimension")

    @property
    def dim(self) -> int:
        return self.instruments[0].dim


def identity_ao(d: int, tol: Tolerances = DEFAULT_TOL) -> AllowedOperation:
    ident = Filter(d, (np.eye(d, dtype=complex),), tol=tol)
    return AllowedOperation(
        (1.0,),
        (Instrument((ident,), tol=tol),),
        ((Channel(d, d, kraus=(np.eye(d, dtype=complex),), tol=tol),),),
        name="identity-ao",
    )


def apply_ao(f: AllowedOperation, n: Channel) -> Channel:
    """The channel sum_mu p_mu sum_k D_{k|mu} o N o F_{k|mu}.

    Composed at the Kraus level; the result is validated against the
    full channel invariants.
    """
    if f.dim != n.dim_in or n.dim_in != n.dim_out:
        raise InvalidShapeError("allowed operation and channel dimensions disagree")
    n_kraus = n.kraus_ops()
    out = []
    for p_mu, inst, posts in zip(f.weights, f.instruments, f.post_channels):
        if p_mu == 0.0:
            continue
        root = np.sqrt(p_mu)
        for branch, post in zip(inst.branches, posts):
            for kf in branch.kraus:
                for kn in n_kraus:
                    for kd in post.kraus_ops():
                        out.append(root * (kd @ kn @ kf))
    return Channel(n.dim_in, n.dim_out, kraus=tuple(out),
                   name=f"{f.name or 'ao'}({n.name or 'channel'})", tol=n.tol)


def compose_ao(outer: AllowedOperation, inner: AllowedOperation) -> AllowedOperation:
    """The allowed operation N -> outer(inner(N)).

    Pre-filters compose as F_inner o F_outer and post-channels as
    D_outer o D_inner, with weights multiplied across mu labels.
    """
    if outer.dim != inner.dim:
        raise InvalidShapeError("composed operations must share one dimension")
    d = outer.dim
    tol = inner.instruments[0].tol
    weights, instruments, posts = [], [], []
    for p2, inst2, posts2 in zip(outer.weights, outer.instruments, outer.post_channels):
        for p1, inst1, posts1 in zip(inner.weights, inner.instruments, inner.post_channels):
            weights.append(p2 * p1)
            branches, branch_posts = [], []
            for f2, d2 in zip(inst2.branches, posts2):
                for f1, d1 in zip(inst1.branches, posts1):
                    kraus = tuple(k1 @ k2 for k1 in f1.kraus for k2 in f2.kraus)
                    branches.append(Filter(d, kraus, tol=tol))
                    dk = tuple(b @ a for b in d2.kraus_ops() for a in d1.kraus_ops())
                    branch_posts.append(Channel(d, d, kraus=dk, tol=tol))
            instruments.append(Instrument(tuple(branches), tol=tol))
            posts.append(tuple(branch_posts))
    return AllowedOperation(tuple(weights), tuple(instruments), tuple(posts),
                            name=f"{outer.name or 'ao'}o{inner.name or 'ao'}")


def default_ao_bank(dim: int = 2, size: int = 32, seed: int = 0,
                    tol: Tolerances = DEFAULT_TOL) -> list[AllowedOperation]:
    """Seeded random operations plus the identity, for bank-restricted searches."""
    bank = [random_ao(seed + i, dim=dim, tol=tol) for i in range(size)]
    bank.append(identity_ao(dim, tol=tol))
    return bank


def random_ao(seed: int, dim: int = 2, n_mu: int = 2, n_branches: int = 2,
              kraus_rank: int = 2, tol: Tolerances = DEFAULT_TOL) -> AllowedOperation:
    """Seeded random allowed operation within the given size caps.

    Instruments are built by splitting a random channel's Kraus set into
    consecutive branches, which makes the branch sum trace preserving by
    construction.
    """
    if n_mu > 2 or n_branches > 2 or kraus_rank > 2:
        raise InvalidShapeError("random_ao caps: n_mu <= 2, n_branches <= 2, kraus_rank <= 2")
    rng = np.random.default_rng(seed)
    weights = tuple(rng.dirichlet(np.ones(n_mu)))
    instruments, posts = [], []
    for _ in range(n_mu):
        ch = random_channel(dim, kraus_rank=n_branches * kraus_rank, rng=rng, tol=tol)
        branches = tuple(
            Filter(dim, ch.kraus[b * kraus_rank: (b + 1) * kraus_rank], tol=tol)
            for b in range(n_branches)
        )
        instruments.append(Instrument(branches, tol=tol))
        posts.append(tuple(random_channel(dim, kraus_rank=kraus_rank, rng=rng, tol=tol)
                           for _ in range(n_branches)))
    return AllowedOperation(weights, tuple(instruments), tuple(posts), name=f"random-ao({seed})")


# ---------------------------------------------------------------------------
# EB warrants and the golden rule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasurePrepareForm:
    """Explicit measure-and-prepare decomposition certifying EB-ness.

    Validates at any dimension by reconstructing the channel's action on
    matrix units: N(rho) = sum_k tr(M_k rho) sigma_k.
    """

    povm: tuple[np.ndarray, ...]
    states: tuple[np.ndarray, ...]

    def validate_for(self, ch: Channel, tol: Tolerances = DEFAULT_TOL) -> None:
        d = ch.dim_in
        total = sum(np.asarray(m, dtype=complex) for m in self.povm)
        if np.max(np.abs(total - np.eye(d))) > tol.tp:
            raise InvalidCertificateError("measure-prepare POVM does not sum to identity")
        for i in range(d):
            for j in range(d):
                unit = np.zeros((d, d), dtype=complex)
                unit[i, j] = 1.0
                rebuilt = sum(
                    np.trace(np.asarray(m) @ unit) * np.asarray(s, dtype=complex)
                    for m, s in zip(self.povm, self.states)
                )
                if np.max(np.abs(rebuilt - ch.apply(unit))) > 100 * tol.rep:
                    raise InvalidCertificateError(
                        "measure-prepare form does not reproduce the channel"
                    )


def _check_eb_warrant(l: Channel, warrant, tol: Tolerances) -> None:
    if warrant is None:
        raise UncheckedPremiseError(
            "golden-rule check needs a free-set warrant: pass warrant='ppt' for a PPT "
            "qubit channel or a MeasurePrepareForm"
        )
    if isinstance(warrant, MeasurePrepareForm):
        warrant.validate_for(l, tol=tol)
        return
    if warrant == "ppt":
        if l.dim_in != 2 or l.dim_out != 2:
            raise UncheckedPremiseError("PPT certifies entanglement breaking only at d=2")
        if not is_psd(partial_transpose(l.choi, (2, 2), "b"), tol.psd):
            raise UncheckedPremiseError("channel's Choi state is not PPT; no EB warrant")
        return
    raise UncheckedPremiseError(f"unknown warrant {warrant!r}")


@dataclass(frozen=True)
class GoldenRuleReport:
    passed: bool
    report: IaCertificateReport
    worst_margin: float
    offending: tuple[int, ...]  # indices of probes whose pushforward came out incompatible


def golden_rule_check(f: AllowedOperation, l: Channel, probes: ProbeFamily,
                      warrant=None, adapter: Optional[sdp.ConicAdapter] = None
                      ) -> GoldenRuleReport:
    """Verify that an allowed operation keeps a free channel free.

    ``l`` must carry a warrant that it annihilates incompatibility
    (an EB certificate). Any probe that detects incompatibility on the
    image is a hard bug, reported with the offending probe and margin.
    """
    _check_eb_warrant(l, warrant, l.tol)
    image = apply_ao(f, l)
    report = probe_ia_test(image, probes, adapter=adapter)
    offending = tuple(i for i, v in enumerate(report.per_probe) if not v.jm)
    worst = min(v.margin for v in report.per_probe)
    return GoldenRuleReport(not report.preserved, report, worst, offending)


# ---------------------------------------------------------------------------
# Constructive parent POVM after an allowed operation
# ---------------------------------------------------------------------------


def jm_parents_for(f: AllowedOperation, l: Channel, probe: MeasurementAssemblage,
                   adapter: Optional[sdp.ConicAdapter] = None
                   ) -> dict[tuple[int, int], ParentPOVM]:
    """Parent POVMs certifying each branch's pushforward through ``l``.

    For every (mu, k), decides joint measurability of
    {l^dag(D_{k|mu}^dag(E_{a|x}))} and collects the certificates that
    :func:`parent_after_ao` consumes.
    """
    parents: dict[tuple[int, int], ParentPOVM] = {}
    d = l.dim_in
    for mu, (inst, posts) in enumerate(zip(f.instruments, f.post_channels)):
        if f.weights[mu] == 0.0:
            continue
        for k, post in enumerate(posts):
            pulled = MeasurementAssemblage(
                d,
                tuple(
                    tuple(Effect(d, heisenberg(l, heisenberg(post, eff.mat)), tol=l.tol)
                          for eff in setting)
                    for setting in probe.settings
                ),
                tol=l.tol,
            )
            verdict = jm_decide(pulled, adapter=adapter)
            if not verdict.jm:
                raise InvalidCertificateError(
                    f"branch (mu={mu}, k={k}): pushforward is not jointly measurable; "
                    "the base channel does not annihilate incompatibility"
                )
            parents[(mu, k)] = verdict.certificate
    return parents


def parent_after_ao(f: AllowedOperation, probe: MeasurementAssemblage,
                    jm_parents: Mapping[tuple[int, int], ParentPOVM]
                    ) -> tuple[MeasurementAssemblage, ParentPOVM]:
    """Assemble the post-operation assemblage and its parent POVM.

    Given branch-level parents {G_i^{(k|mu)}}, builds

        W_{a|x} = sum_{mu,k} p_mu F_{k|mu}^dag(M^{(k|mu)}_{a|x}),
        G~_i    = sum_{mu,k} p_mu F_{k|mu}^dag(G_i^{(k|mu)}),

    checks that {G~_i} is a valid POVM (unitality of the summed branch
    adjoints) and that sum_i D(a|x,i) G~_i reproduces W, and returns
    both.
    """
    d = f.dim
    canonical = tuple(deterministic_responses(probe.outcome_counts()))
    n_lam = len(canonical)

    for key, parent in jm_parents.items():
        if not parent.deterministic or len(parent.effects) != n_lam or \
                tuple(parent.responses) != canonical:
            raise InvalidCertificateError(
                f"parent for branch {key} does not match the probe's response structure"
            )

    g_tilde = [np.zeros((d, d), dtype=complex) for _ in range(n_lam)]
    w = [[np.zeros((d, d), dtype=complex) for _ in setting] for setting in probe.settings]
    for mu, (p_mu, inst) in enumerate(zip(f.weights, f.instruments)):
        if p_mu == 0.0:
            continue
        for k, branch in enumerate(inst.branches):
            if (mu, k) not in jm_parents:
                raise InvalidCertificateError(f"missing parent for branch (mu={mu}, k={k})")
            parent = jm_parents[(mu, k)]
            for i, g in enumerate(parent.effects):
                g_tilde[i] += p_mu * branch.adjoint(g)
            for x in range(probe.n_settings):
                for a in range(len(probe.settings[x])):
                    w[x][a] += p_mu * branch.adjoint(parent.reconstruct(x, a))

    parent_out = ParentPOVM(tuple(g_tilde), canonical, tol=probe.tol)
    w_asm = MeasurementAssemblage(
        d,
        tuple(tuple(Effect(d, m, tol=probe.tol) for m in setting) for setting in w),
        name=f"after-{f.name or 'ao'}({probe.name})",
        tol=probe.tol,
    )
    residual = parent_out.reconstruction_residual(w_asm)
    if residual > 1e-8:
        raise InvalidCertificateError(
            f"parent reconstruction residual {residual:.2e} exceeds 1e-8"
        )
    return w_asm, parent_out
