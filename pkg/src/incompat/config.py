"""Numerical tolerances used across the package.

All checks run one decade above typical interior-point solver precision,
so honest solutions pass and genuinely broken data fails. Every
constructor and solver entry point accepts an explicit
:class:`Tolerances`; the module-level :data:`DEFAULT_TOL` is used when
none is given.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-8    # Hermiticity residual, max-abs
    psd: float = 1e-8     # eigenvalue floor for positivity checks
    tp: float = 1e-7      # trace-preservation / POVM completeness residual
    rep: float = 1e-8     # agreement between representations (Kraus vs Choi)
    feas: float = 1e-7    # SDP feasibility margin
    cert: float = 1e-6    # certificate reconstruction residual
    gap: float = 1e-6     # lower-vs-upper bound ordering slack

    def override(self, **kwargs: float) -> "Tolerances":
        return replace(self, **kwargs)


DEFAULT_TOL = Tolerances()
