"""Channel constructors and channel-level functionals.

Covers the Choi calculus (round-trippable Kraus <-> Choi), the
Heisenberg adjoint, the depolarising family, maximally entangled states
and the singlet fraction, plus seeded random samplers used by the
property suites. The diamond-norm distance lives in
:mod:`incompat.diamond` because it needs the SDP kernel.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import InvalidDimensionError, InvalidParameterError, InvalidShapeError
from . import linalg
from .linalg import dagger
from .objects import Channel, Effect, MeasurementAssemblage, QState


def max_entangled(d: int, tol: Tolerances = DEFAULT_TOL) -> QState:
    """The maximally entangled state |phi+><phi+| on dimension d^2."""
    v = linalg.max_entangled_vec(d)
    return QState(d * d, np.outer(v, v.conj()), tol=tol)


def identity_channel(d: int, tol: Tolerances = DEFAULT_TOL) -> Channel:
    return Channel(d, d, kraus=(np.eye(d, dtype=complex),), name="identity", tol=tol)


def depolarising(p: float, d: int, tol: Tolerances = DEFAULT_TOL) -> Channel:
    """Depolarising channel: keep the state with probability p, else Id/d.

    Its Choi state is ``p * phi+ + (1 - p) * Id / d^2``.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"depolarising: p must be in [0, 1], got {p}")
    if d < 2:
        raise InvalidDimensionError(f"depolarising: d must be >= 2, got {d}")
    phi = max_entangled(d, tol=tol).mat
    choi = p * phi + (1.0 - p) * np.eye(d * d) / (d * d)
    return Channel(d, d, choi=choi, name=f"depolarising(p={p})", tol=tol)


def choi_of_channel(n: Channel) -> QState:
    """Normalized Choi state of a channel, as a QState."""
    return QState(n.dim_out * n.dim_in, n.choi, tol=n.tol)


def channel_of_choi(
    c: QState | np.ndarray,
    d_in: int,
    d_out: int,
    name: str = "",
    tol: Tolerances = DEFAULT_TOL,
) -> Channel:
    """Channel from a normalized Choi state (validates marginal and PSD)."""
    mat = c.mat if isinstance(c, QState) else c
    return Channel(d_in, d_out, choi=mat, name=name, tol=tol)


def heisenberg(n: Channel, e: Effect | np.ndarray) -> np.ndarray:
    """Adjoint (Heisenberg) action N^dag(E); unital, duality-satisfying."""
    mat = e.mat if isinstance(e, Effect) else e
    if mat.shape != (n.dim_out, n.dim_out):
        raise InvalidShapeError(
            f"heisenberg: effect must be {n.dim_out}x{n.dim_out}, got {mat.shape}"
        )
    if n.kraus is not None:
        return linalg.adjoint_apply_kraus(n.kraus, mat)
    return linalg.adjoint_from_choi(n.choi, mat, n.dim_in)


def singlet_fraction(n: Channel) -> float:
    """Overlap <phi+| (N x Id)(phi+) |phi+> of the Choi state with phi+."""
    if n.dim_in != n.dim_out:
        raise InvalidShapeError("singlet fraction needs dim_in == dim_out")
    phi = linalg.max_entangled_vec(n.dim_in)
    val = float(np.real(phi.conj() @ n.choi @ phi))
    return min(max(val, 0.0), 1.0)


def measure_prepare_channel(
    povm: Sequence[Effect | np.ndarray],
    states: Sequence[QState | np.ndarray],
    name: str = "measure-prepare",
    tol: Tolerances = DEFAULT_TOL,
) -> Channel:
    """Entanglement-breaking channel rho -> sum_k tr(M_k rho) sigma_k."""
    if len(povm) != len(states):
        raise InvalidShapeError("measure-prepare: need one state per POVM element")
    effs = [m.mat if isinstance(m, Effect) else np.asarray(m, dtype=complex) for m in povm]
    sts = [s.mat if isinstance(s, QState) else np.asarray(s, dtype=complex) for s in states]
    d = effs[0].shape[0]
    kraus = []
    for m, s in zip(effs, sts):
        # sigma = sum_i q_i |v_i><v_i|, M = sum_j w_j |u_j><u_j| gives
        # Kraus sqrt(q_i w_j) |v_i><u_j|
        mv, mu = np.linalg.eigh((m + dagger(m)) / 2)
        sv, su = np.linalg.eigh((s + dagger(s)) / 2)
        for wj, uj in zip(mv, mu.T):
            if wj <= tol.psd:
                continue
            for qi, vi in zip(sv, su.T):
                if qi <= tol.psd:
                    continue
                kraus.append(np.sqrt(wj * qi) * np.outer(vi, uj.conj()))
    return Channel(d, sts[0].shape[0], kraus=tuple(kraus), name=name, tol=tol)


def measure_z_prepare(d: int = 2, tol: Tolerances = DEFAULT_TOL) -> Channel:
    """Measure the computational basis and re-prepare the outcome state."""
    povm = [np.diag([1.0 + 0j if i == k else 0.0 for i in range(d)]) for k in range(d)]
    states = povm
    ch = measure_prepare_channel(povm, states, name="measure-z-prepare", tol=tol)
    return ch


def random_channel(
    d: int,
    kraus_rank: int = 3,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    tol: Tolerances = DEFAULT_TOL,
) -> Channel:
    """Random CPTP map: Gaussian Kraus operators, completeness-corrected.

    Samples ``kraus_rank`` Ginibre matrices and right-multiplies by
    ``S^{-1/2}`` with ``S = sum K^dag K``, which enforces trace
    preservation exactly. Deterministic given the seed.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    ks = [linalg.ginibre(rng, d, d) for _ in range(kraus_rank)]
    s = sum(dagger(k) @ k for k in ks)
    vals, vecs = np.linalg.eigh(s)
    inv_sqrt = (vecs / np.sqrt(vals)) @ dagger(vecs)
    return Channel(d, d, kraus=tuple(k @ inv_sqrt for k in ks), tol=tol)


def random_state(
    d: int,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    tol: Tolerances = DEFAULT_TOL,
) -> QState:
    """Random density matrix from a normalized Ginibre product."""
    if rng is None:
        rng = np.random.default_rng(seed)
    g = linalg.ginibre(rng, d, d)
    rho = g @ dagger(g)
    return QState(d, rho / np.trace(rho).real, tol=tol)


def random_effect(
    d: int,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    tol: Tolerances = DEFAULT_TOL,
) -> Effect:
    """Random effect with spectrum drawn uniformly in [0, 1]."""
    if rng is None:
        rng = np.random.default_rng(seed)
    g = linalg.ginibre(rng, d, d)
    _, vecs = np.linalg.eigh(g @ dagger(g))
    vals = rng.uniform(0.0, 1.0, size=d)
    return Effect(d, (vecs * vals) @ dagger(vecs), tol=tol)


def random_filter(
    d: int,
    kraus_rank: int = 3,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    tol: Tolerances = DEFAULT_TOL,
):
    """Random trace-non-increasing map: a random channel scaled into the cone."""
    from .objects import Filter

    if rng is None:
        rng = np.random.default_rng(seed)
    ch = random_channel(d, kraus_rank=kraus_rank, rng=rng, tol=tol)
    scale = np.sqrt(rng.uniform(0.2, 1.0))
    return Filter(d, tuple(scale * k for k in ch.kraus), kind="general", tol=tol)


def pushforward(n: Channel, e: MeasurementAssemblage) -> MeasurementAssemblage:
    """Heisenberg pushforward {N^dag(E_{a|x})} of an assemblage.

    Unitality of N^dag guarantees the result is again a valid
    assemblage.
    """
    if e.dim != n.dim_out:
        raise InvalidShapeError(
            f"pushforward: assemblage dim {e.dim} != channel output dim {n.dim_out}"
        )
    settings = tuple(
        tuple(Effect(n.dim_in, heisenberg(n, eff), tol=e.tol) for eff in setting)
        for setting in e.settings
    )
    return MeasurementAssemblage(n.dim_in, settings, name=f"{n.name or 'channel'}^dag({e.name})", tol=e.tol)
