"""Diamond-norm distance between channels via semidefinite programming.

Uses the standard primal SDP for the completely bounded trace norm of a
map Phi with unnormalized Choi matrix J:

    maximize  Re tr[J^dag X]
    s.t.      [[Id kron rho0, X], [X^dag, Id kron rho1]] >= 0,
              rho0, rho1 density matrices.

The block matrix is modelled as one PSD variable V with its diagonal
blocks pinned to Id kron rho_i by equality constraints, so only
Hermitian variables are needed.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import InvalidShapeError
from .objects import Channel
from . import sdp
from .sdp import (
    SdpProblem,
    sop_block_diag_extract,
    sop_kron_id_left,
    sop_trace,
    superop_expr,
)


def diamond_norm(choi_diff: np.ndarray, d_in: int, d_out: int,
                 adapter: Optional[sdp.ConicAdapter] = None,
                 tol: Tolerances = DEFAULT_TOL) -> float:
    """Diamond norm of the Hermiticity-preserving map with the given
    *normalized* Choi-state difference (trace-one convention)."""
    big = d_out * d_in
    j_unnorm = d_in * np.asarray(choi_diff, dtype=complex)

    p = SdpProblem("maximize")
    v = p.add_var("V", 2 * big, psd=True)
    r0 = p.add_var("rho0", d_in, psd=True)
    r1 = p.add_var("rho1", d_in, psd=True)

    kron_map = sop_kron_id_left(d_out, d_in)
    p.add_equality(
        "tl",
        superop_expr(v, sop_block_diag_extract(2 * big, 0, big), big)
        - superop_expr(r0, kron_map, big),
        np.zeros((big, big)),
    )
    p.add_equality(
        "br",
        superop_expr(v, sop_block_diag_extract(2 * big, big, big), big)
        - superop_expr(r1, kron_map, big),
        np.zeros((big, big)),
    )
    p.add_equality("tr0", superop_expr(r0, sop_trace(d_in), 1), 1.0)
    p.add_equality("tr1", superop_expr(r1, sop_trace(d_in), 1), 1.0)

    # objective tr[W V] with W = [[0, J/2], [J^dag/2, 0]] gives Re tr[J^dag V_TR]
    w = np.zeros((2 * big, 2 * big), dtype=complex)
    w[:big, big:] = j_unnorm / 2.0
    w[big:, :big] = j_unnorm.conj().T / 2.0
    p.set_objective({"V": w})

    sol = sdp.solve(p, adapter=adapter, tol=tol)
    return max(float(sol.value), 0.0)


def diamond_distance(n: Channel, m: Channel,
                     adapter: Optional[sdp.ConicAdapter] = None) -> float:
    """Diamond-norm distance ||N - M||_diamond, in [0, 2]."""
    if (n.dim_in, n.dim_out) != (m.dim_in, m.dim_out):
        raise InvalidShapeError("diamond distance needs equal channel dimensions")
    diff = n.choi - m.choi
    if np.max(np.abs(diff)) < 1e-14:
        return 0.0
    return diamond_norm(diff, n.dim_in, n.dim_out, adapter=adapter, tol=n.tol)
