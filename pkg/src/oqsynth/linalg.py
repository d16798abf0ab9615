"""Dense complex matrix kernel used by every other module.

All matrices are numpy ``complex128`` arrays. Every function is pure and
never mutates its arguments, so values are safe to share across threads.
Tolerances are explicit parameters with stated defaults; there are no
hidden globals.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


class LinalgError(Exception):
    """Base class for matrix-kernel failures."""


class NotHermitianError(LinalgError):
    pass


class NotPSDError(LinalgError):
    pass


class NotIsometryError(LinalgError):
    pass


class DimensionMismatchError(LinalgError):
    pass


class ConvergenceFailure(LinalgError):
    pass


def as_cmatrix(a) -> np.ndarray:
    """Coerce to a 2-d complex128 array (copying, never aliasing)."""
    m = np.array(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-d matrix, got ndim={m.ndim}")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return a.conj().T


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; dimensions multiply."""
    return np.kron(a, b)


def max_abs(a: np.ndarray) -> float:
    """Max-entry norm ||A||_max."""
    return float(np.abs(a).max()) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float = 1e-10) -> bool:
    a = np.asarray(a)
    return a.shape[0] == a.shape[1] and max_abs(a - dagger(a)) <= tol


def is_unitary(a: np.ndarray, tol: float = 1e-10) -> bool:
    a = np.asarray(a)
    if a.shape[0] != a.shape[1]:
        return False
    eye = np.eye(a.shape[0])
    return max_abs(dagger(a) @ a - eye) <= tol


def is_isometry(a: np.ndarray, tol: float = 1e-10) -> bool:
    """True iff ||A^dag A - I||_max <= tol (columns orthonormal)."""
    a = np.asarray(a)
    if a.shape[0] < a.shape[1]:
        return False
    return max_abs(dagger(a) @ a - np.eye(a.shape[1])) <= tol


def is_psd(a: np.ndarray, tol: float = 1e-10) -> bool:
    if not is_hermitian(a, tol):
        return False
    evals = np.linalg.eigvalsh((a + dagger(a)) / 2)
    return bool(evals.min() >= -tol)


def psd_sqrt(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition.

    Eigenvalues in ``[-tol, 0)`` are clamped to 0; anything below ``-tol``
    raises :class:`NotPSDError`. The result ``B`` is Hermitian PSD with
    ``B @ B`` equal to the input within ``10 * tol``.
    """
    a = np.asarray(a, dtype=complex)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"psd_sqrt needs a square matrix, got {a.shape}")
    if max_abs(a - dagger(a)) > tol:
        raise NotHermitianError(
            f"matrix is not Hermitian within {tol} (deviation {max_abs(a - dagger(a)):.3e})"
        )
    w, v = np.linalg.eigh((a + dagger(a)) / 2)
    if w.min() < -tol:
        raise NotPSDError(f"eigenvalue {w.min():.3e} below -{tol}")
    w = np.clip(w, 0.0, None)
    b = (v * np.sqrt(w)) @ dagger(v)
    return (b + dagger(b)) / 2


def svd_factorize(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full SVD ``A = U diag(s) Vdag`` with s non-negative, descending."""
    a = np.asarray(a, dtype=complex)
    try:
        u, s, vdag = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"SVD did not converge: {exc}") from exc
    return u, s, vdag


def complete_isometry(v: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Extend an isometry to a square unitary whose first columns equal ``v``.

    Remaining columns are built by Gram-Schmidt over standard basis vectors,
    skipping candidates whose projection residual norm falls below 1e-6, and
    re-orthogonalized once for numerical stability. The input columns are
    copied into the result exactly.
    """
    v = np.asarray(v, dtype=complex)
    rows, cols = v.shape
    if rows < cols:
        raise NotIsometryError(f"isometry needs rows >= cols, got {v.shape}")
    if max_abs(dagger(v) @ v - np.eye(cols)) > tol:
        raise NotIsometryError("columns are not orthonormal within tolerance")

    fixed = [v[:, j] for j in range(cols)]
    added: list[np.ndarray] = []
    for i in range(rows):
        if cols + len(added) == rows:
            break
        cand = np.zeros(rows, dtype=complex)
        cand[i] = 1.0
        for col in fixed + added:
            cand = cand - np.vdot(col, cand) * col
        norm = np.linalg.norm(cand)
        if norm < 1e-6:
            continue
        added.append(cand / norm)
    if cols + len(added) != rows:
        raise NotIsometryError("failed to complete isometry from standard basis")

    # one re-orthogonalization pass over the new columns
    for idx in range(len(added)):
        col = added[idx]
        for prev in fixed + added[:idx]:
            col = col - np.vdot(prev, col) * prev
        added[idx] = col / np.linalg.norm(col)

    u = np.column_stack(fixed + added)
    u[:, :cols] = v
    if not is_unitary(u, tol):
        raise NotIsometryError("completed matrix failed the unitarity check")
    return u


def partial_trace(
    rho: np.ndarray, dims: Sequence[int], keep: Iterable[int]
) -> np.ndarray:
    """Trace out all subsystems not in ``keep``.

    ``dims`` lists subsystem dimensions most-significant first, i.e. the
    row index factors as ``i = i_0 * (d_1 * ... ) + ... + i_{n-1}``.
    The trace of the input is preserved.
    """
    rho = np.asarray(rho, dtype=complex)
    dims = list(dims)
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise DimensionMismatchError(
            f"matrix shape {rho.shape} does not match dims product {total}"
        )
    keep_set = set(keep)
    if not keep_set <= set(range(len(dims))):
        raise DimensionMismatchError(f"keep indices {sorted(keep_set)} out of range")

    t = rho.reshape(dims + dims)
    cur = list(dims)
    for i in sorted(set(range(len(dims))) - keep_set, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + len(cur))
        del cur[i]
    out = int(np.prod(cur)) if cur else 1
    return t.reshape(out, out)
