"""Dense complex linear algebra on plain numpy arrays.

Conventions used throughout the package:

* every operator is a ``complex128`` ndarray in row-major layout;
* bipartite systems are ordered (first factor) x (second factor), with
  composite index ``i * d_second + j``;
* the Choi state of a channel N acting on dimension ``d`` is the
  *normalized* state ``(N x Id)(|phi+><phi+|)`` with trace one, living on
  (output) x (input copy);
* ``vec`` is row-major: ``vec(A X B) = (A kron B.T) vec(X)``.

Structured quantum objects (states, effects, channels, ...) live in
:mod:`incompat.objects`; this module only knows about arrays.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidDimensionError, InvalidShapeError, NotAChannelError


def as_complex_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D complex128 array, rejecting NaN/Inf entries."""
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2:
        raise InvalidShapeError(f"{name}: expected a 2-D array, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise InvalidShapeError(f"{name}: entries must be finite")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def herm_residual(m: np.ndarray) -> float:
    """Max-abs deviation from Hermiticity."""
    return float(np.max(np.abs(m - dagger(m)))) if m.size else 0.0

def is_hermitian(m: np.ndarray, tol: float) -> bool:
    return herm_residual(m) <= tol


def min_eig(m: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of ``m``."""
    h = (m + dagger(m)) / 2
    return float(np.linalg.eigvalsh(h)[0])


def max_eig(m: np.ndarray) -> float:
    h = (m + dagger(m)) / 2
    return float(np.linalg.eigvalsh(h)[-1])


def is_psd(m: np.ndarray, tol: float) -> bool:
    return min_eig(m) >= -tol


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix (negatives clipped)."""
    vals, vecs = np.linalg.eigh((m + dagger(m)) / 2)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ dagger(vecs)


def psd_clip(m: np.ndarray) -> np.ndarray:
    """Project a Hermitian matrix onto the PSD cone (eigenvalue floor 0)."""
    vals, vecs = np.linalg.eigh((m + dagger(m)) / 2)
    vals = np.clip(vals, 0.0, None)
    return (vecs * vals) @ dagger(vecs)


def trace_norm(m: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def matrix_units(d: int) -> Iterable[np.ndarray]:
    """The d^2 matrix units |i><j|, a spanning operator basis."""
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            yield e


def max_entangled_vec(d: int) -> np.ndarray:
    """|phi+> = sum_n |nn> / sqrt(d) as a length-d^2 vector."""
    if d < 2:
        raise InvalidDimensionError(f"maximally entangled state needs d >= 2, got {d}")
    v = np.zeros(d * d, dtype=complex)
    v[:: d + 1] = 1.0 / np.sqrt(d)
    return v


def partial_trace(m: np.ndarray, dims: tuple[int, int], traced: str) -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    ``dims = (d_a, d_b)`` are the factor dimensions and ``traced`` is
    ``"a"`` or ``"b"``. The total dimension must factor accordingly.
    """
    d_a, d_b = dims
    m = as_complex_matrix(m)
    if m.shape != (d_a * d_b, d_a * d_b):
        raise InvalidShapeError(
            f"partial trace: operator is {m.shape}, dims {d_a}x{d_b} do not factor it"
        )
    t = m.reshape(d_a, d_b, d_a, d_b)
    if traced == "a":
        return np.einsum("ibid->bd", t)
    if traced == "b":
        return np.einsum("ajbj->ab", t)
    raise InvalidShapeError(f"traced must be 'a' or 'b', got {traced!r}")


def partial_transpose(m: np.ndarray, dims: tuple[int, int], which: str = "b") -> np.ndarray:
    """Transpose one factor of a bipartite operator."""
    d_a, d_b = dims
    t = m.reshape(d_a, d_b, d_a, d_b)
    if which == "b":
        return np.einsum("abcd->adcb", t).reshape(d_a * d_b, d_a * d_b)
    if which == "a":
        return np.einsum("abcd->cbad", t).reshape(d_a * d_b, d_a * d_b)
    raise InvalidShapeError(f"which must be 'a' or 'b', got {which!r}")


def choi_from_kraus(kraus: Sequence[np.ndarray], d_in: int) -> np.ndarray:
    """Normalized Choi state sum_i (K_i kron Id) phi+ (K_i kron Id)^dag."""
    if not kraus:
        raise NotAChannelError("empty Kraus list")
    d_out = kraus[0].shape[0]
    phi = max_entangled_vec(d_in)
    choi = np.zeros((d_out * d_in, d_out * d_in), dtype=complex)
    ident = np.eye(d_in)
    for k in kraus:
        v = np.kron(k, ident) @ phi
        choi += np.outer(v, v.conj())
    return choi


def kraus_from_choi(choi: np.ndarray, d_in: int, d_out: int, eig_floor: float) -> list[np.ndarray]:
    """Minimal Kraus set from the eigendecomposition of a normalized Choi state.

    Eigenvalues at or below ``eig_floor`` are discarded, which keeps the
    extraction deterministic and the rank minimal.
    """
    vals, vecs = np.linalg.eigh((choi + dagger(choi)) / 2)
    kraus = []
    for lam, v in zip(vals, vecs.T):
        if lam > eig_floor:
            kraus.append(np.sqrt(d_in * lam) * v.reshape(d_out, d_in))
    if not kraus:
        raise NotAChannelError("Choi matrix has no eigenvalue above the floor")
    return kraus


def apply_kraus(kraus: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    out = np.zeros((kraus[0].shape[0], kraus[0].shape[0]), dtype=complex)
    for k in kraus:
        out += k @ rho @ dagger(k)
    return out


def adjoint_apply_kraus(kraus: Sequence[np.ndarray], e: np.ndarray) -> np.ndarray:
    """Heisenberg action sum_i K_i^dag E K_i."""
    out = np.zeros((kraus[0].shape[1], kraus[0].shape[1]), dtype=complex)
    for k in kraus:
        out += dagger(k) @ e @ k
    return out


def adjoint_from_choi(choi: np.ndarray, e: np.ndarray, d_in: int) -> np.ndarray:
    """Heisenberg action from the normalized Choi state.

    N^dag(E) = d_in * (tr_out[ J (E kron Id) ])^T, where the trace runs
    over the output factor.
    """
    d_out = e.shape[0]
    prod = choi @ np.kron(e, np.eye(d_in))
    return d_in * partial_trace(prod, (d_out, d_in), "a").T


def ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Complex standard-Gaussian matrix."""
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def matrix_to_json(m: np.ndarray) -> list:
    """Nested row lists with complex entries encoded as [re, im]."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def matrix_from_json(rows: list, name: str = "matrix") -> np.ndarray:
    try:
        arr = np.array([[complex(e[0], e[1]) for e in row] for row in rows], dtype=complex)
    except (TypeError, IndexError) as exc:
        raise InvalidShapeError(f"{name}: malformed matrix JSON") from exc
    return as_complex_matrix(arr, name)
