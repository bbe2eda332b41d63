"""The quantum object model: states, effects, channels, filters, assemblages.

All types are immutable after construction (arrays are defensively
copied and marked read-only), validate their invariants eagerly, and are
safe to share between threads. Tolerances default to
:data:`incompat.config.DEFAULT_TOL` and can be overridden per object.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import InvalidShapeError, NotAChannelError
from . import linalg
from .linalg import as_complex_matrix, dagger


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=complex)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class QState:
    """Density operator: Hermitian, PSD, unit trace (within tolerance)."""

    dim: int
    mat: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        m = as_complex_matrix(self.mat, "state")
        if m.shape != (self.dim, self.dim):
            raise InvalidShapeError(f"state: expected {self.dim}x{self.dim}, got {m.shape}")
        if not linalg.is_hermitian(m, self.tol.herm):
            raise InvalidShapeError("state: not Hermitian within tolerance")
        if linalg.min_eig(m) < -self.tol.psd:
            raise InvalidShapeError("state: negative eigenvalue beyond tolerance")
        if abs(np.trace(m).real - 1.0) > self.tol.tp:
            raise InvalidShapeError(f"state: trace {np.trace(m).real} != 1")
        object.__setattr__(self, "mat", _frozen(m))

    def purity(self) -> float:
        return float(np.trace(self.mat @ self.mat).real)


@dataclass(frozen=True)
class Effect:
    """POVM element: Hermitian with spectrum in [0, 1] (within tolerance)."""

    dim: int
    mat: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        m = as_complex_matrix(self.mat, "effect")
        if m.shape != (self.dim, self.dim):
            raise InvalidShapeError(f"effect: expected {self.dim}x{self.dim}, got {m.shape}")
        if not linalg.is_hermitian(m, self.tol.herm):
            raise InvalidShapeError("effect: not Hermitian within tolerance")
        lo, hi = linalg.min_eig(m), linalg.max_eig(m)
        if lo < -self.tol.psd or hi > 1.0 + self.tol.psd:
            raise InvalidShapeError(f"effect: spectrum [{lo:.3e}, {hi:.3e}] outside [0, 1]")
        object.__setattr__(self, "mat", _frozen(m))


@dataclass(frozen=True)
class Channel:
    """Completely positive trace-preserving map.

    Holds a Kraus list, a normalized Choi state, or both; whichever is
    missing is derived at construction, and if both are given they must
    agree. The Choi convention is the trace-one state
    ``(N x Id)(|phi+><phi+|)`` on (output) x (input copy), whose partial
    trace over the output factor equals ``Id / dim_in``.
    """

    dim_in: int
    dim_out: int
    kraus: Optional[tuple[np.ndarray, ...]] = None
    choi: Optional[np.ndarray] = None
    name: str = field(default="", compare=False)
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        if self.kraus is None and self.choi is None:
            raise NotAChannelError("channel needs a Kraus list or a Choi state")

        kraus = None
        if self.kraus is not None:
            kraus = tuple(_frozen(as_complex_matrix(k, "kraus")) for k in self.kraus)
            for k in kraus:
                if k.shape != (self.dim_out, self.dim_in):
                    raise InvalidShapeError(
                        f"kraus: expected {self.dim_out}x{self.dim_in}, got {k.shape}"
                    )
            comp = sum(dagger(k) @ k for k in kraus)
            if np.max(np.abs(comp - np.eye(self.dim_in))) > self.tol.tp:
                raise NotAChannelError("Kraus completeness sum differs from identity")

        if self.choi is not None:
            choi = as_complex_matrix(self.choi, "choi")
            d = self.dim_out * self.dim_in
            if choi.shape != (d, d):
                raise InvalidShapeError(f"choi: expected {d}x{d}, got {choi.shape}")
            if not linalg.is_hermitian(choi, self.tol.herm):
                raise NotAChannelError("choi: not Hermitian within tolerance")
            if linalg.min_eig(choi) < -self.tol.psd:
                raise NotAChannelError("choi: not PSD within tolerance")
            marg = linalg.partial_trace(choi, (self.dim_out, self.dim_in), "a")
            if np.max(np.abs(marg - np.eye(self.dim_in) / self.dim_in)) > self.tol.tp:
                raise NotAChannelError("choi: output marginal is not Id/dim_in")
        else:
            choi = linalg.choi_from_kraus(kraus, self.dim_in)

        if self.kraus is not None and self.choi is not None:
            ref = linalg.choi_from_kraus(kraus, self.dim_in)
            if np.max(np.abs(ref - choi)) > self.tol.rep:
                raise NotAChannelError("Kraus and Choi representations disagree")

        object.__setattr__(self, "kraus", kraus)
        object.__setattr__(self, "choi", _frozen(choi))

    def kraus_ops(self) -> tuple[np.ndarray, ...]:
        """Kraus operators, extracted from the Choi state when not stored."""
        if self.kraus is not None:
            return self.kraus
        ops = linalg.kraus_from_choi(self.choi, self.dim_in, self.dim_out, self.tol.psd)
        return tuple(ops)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if rho.shape != (self.dim_in, self.dim_in):
            raise InvalidShapeError(f"apply: state must be {self.dim_in}x{self.dim_in}")
        return linalg.apply_kraus(self.kraus_ops(), rho)


@dataclass(frozen=True)
class Filter:
    """Completely positive trace-non-increasing map.

    ``kind="f1"`` marks the single-Kraus form sqrt(K) . sqrt(K) with
    0 <= K <= Id; its one Kraus operator must itself be PSD with
    spectrum in [0, 1]. An empty Kraus list is the zero filter.
    """

    dim: int
    kraus: tuple[np.ndarray, ...]
    kind: str = "general"
    name: str = field(default="", compare=False)
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("general", "f1"):
            raise InvalidShapeError(f"filter kind must be 'general' or 'f1', got {self.kind!r}")
        kraus = tuple(_frozen(as_complex_matrix(k, "filter kraus")) for k in self.kraus)
        for k in kraus:
            if k.shape != (self.dim, self.dim):
                raise InvalidShapeError(f"filter kraus: expected {self.dim}x{self.dim}")
        comp = sum((dagger(k) @ k for k in kraus), np.zeros((self.dim, self.dim), dtype=complex))
        if linalg.max_eig(comp) > 1.0 + self.tol.tp:
            raise InvalidShapeError("filter: sum K^dag K exceeds identity")
        if self.kind == "f1":
            if len(kraus) != 1:
                raise InvalidShapeError("f1 filter must have exactly one Kraus operator")
            op = kraus[0]
            if not linalg.is_hermitian(op, self.tol.herm):
                raise InvalidShapeError("f1 filter operator must be Hermitian")
            if linalg.min_eig(op) < -self.tol.psd or linalg.max_eig(op) > 1.0 + self.tol.psd:
                raise InvalidShapeError("f1 filter operator spectrum outside [0, 1]")
        object.__setattr__(self, "kraus", kraus)

    def completeness(self) -> np.ndarray:
        """The operator F^dag(Id) = sum K^dag K."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k in self.kraus:
            out += dagger(k) @ k
        return out

    def apply(self, rho: np.ndarray) -> "FilterOutcome":
        """Apply to a state; branches of probability < 1e-12 are not normalized."""
        raw = np.zeros((self.dim, self.dim), dtype=complex)
        for k in self.kraus:
            raw += k @ rho @ dagger(k)
        prob = float(np.trace(raw).real)
        if prob < 1e-12:
            return FilterOutcome(state=None, probability=max(prob, 0.0))
        return FilterOutcome(state=QState(self.dim, raw / prob, tol=self.tol), probability=prob)

    def adjoint(self, e: np.ndarray) -> np.ndarray:
        """Heisenberg action sum K^dag E K (zero filter gives the zero map)."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k in self.kraus:
            out += dagger(k) @ e @ k
        return out


@dataclass(frozen=True)
class FilterOutcome:
    """Result of pushing a state through a filter.

    ``state`` is None exactly when the branch probability fell below
    1e-12 (a zero-probability branch is reported, never normalized).
    """

    state: Optional[QState]
    probability: float

    @property
    def zero_probability_branch(self) -> bool:
        return self.state is None


@dataclass(frozen=True)
class MeasurementAssemblage:
    """Indexed effects {E_{a|x}}: one POVM per setting x, outcomes a.

    ``settings[x][a]`` is an :class:`Effect`; each setting must sum to
    the identity within tolerance.
    """

    dim: int
    settings: tuple[tuple[Effect, ...], ...]
    name: str = field(default="", compare=False)
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        settings = tuple(tuple(s) for s in self.settings)
        if not settings or any(not s for s in settings):
            raise InvalidShapeError("assemblage needs at least one setting with outcomes")
        for x, setting in enumerate(settings):
            total = np.zeros((self.dim, self.dim), dtype=complex)
            for eff in setting:
                if not isinstance(eff, Effect):
                    raise InvalidShapeError("assemblage entries must be Effect objects")
                if eff.dim != self.dim:
                    raise InvalidShapeError("assemblage effects must share one dimension")
                total += eff.mat
            if np.max(np.abs(total - np.eye(self.dim))) > self.tol.tp:
                raise InvalidShapeError(f"setting {x}: effects do not sum to identity")
        object.__setattr__(self, "settings", settings)

    @property
    def n_settings(self) -> int:
        return len(self.settings)

    def outcome_counts(self) -> list[int]:
        return [len(s) for s in self.settings]

    def effect(self, x: int, a: int) -> np.ndarray:
        return self.settings[x][a].mat


def assemblage_from_matrices(
    dim: int,
    settings: Sequence[Sequence[np.ndarray]],
    name: str = "",
    tol: Tolerances = DEFAULT_TOL,
) -> MeasurementAssemblage:
    """Build an assemblage from raw effect matrices."""
    effs = tuple(tuple(Effect(dim, m, tol=tol) for m in s) for s in settings)
    return MeasurementAssemblage(dim, effs, name=name, tol=tol)
