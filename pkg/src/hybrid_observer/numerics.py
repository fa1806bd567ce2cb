"""Small dense real linear algebra.

Thin, validated wrappers over numpy/scipy. Every routine accepts
array-likes and returns fresh float arrays; nothing is modified in place.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import NumericsError

__all__ = [
    "Spectrum",
    "as_matrix",
    "mat_exp",
    "eigenvalues",
    "zeta",
    "spectral_norm",
    "nullspace",
    "row_space",
    "rank",
    "default_tol",
]


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    max_real_part: float

    def __iter__(self):
        return iter(self.eigenvalues)

    def __len__(self):
        return len(self.eigenvalues)


def as_matrix(M, name="matrix"):
    """Coerce ``M`` to a finite 2-D float array (scalars become 1x1)."""
    arr = np.array(M, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise NumericsError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"{name} has non-finite entries")
    return arr


def _square(M, name):
    arr = as_matrix(M, name)
    if arr.shape[0] != arr.shape[1]:
        raise NumericsError(f"{name} must be square, got shape {arr.shape}")
    return arr


def mat_exp(M, t=1.0):
    """Return ``expm(M * t)``.

    Uses scipy's scaling-and-squaring Pade approximant.
    """
    M = _square(M, "M")
    if not np.isfinite(t):
        raise NumericsError("t must be finite")
    return scipy.linalg.expm(M * float(t))


def eigenvalues(M):
    M = _square(M, "M")
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"eigenvalue iteration did not converge: {exc}") from exc
    ev = np.asarray(ev, dtype=complex)
    # sort for reproducible reporting: by real part, then imaginary part
    ev = ev[np.lexsort((ev.imag, ev.real))]
    return Spectrum(eigenvalues=ev, max_real_part=float(np.max(ev.real)))


def zeta(M):
    """Largest eigenvalue of the symmetric part ``(M + M')/2``.

    This is the logarithmic 2-norm of ``M``, so that
    ``|expm(M t)|_2 <= exp(zeta(M) t)`` for ``t >= 0``.
    """
    M = _square(M, "M")
    try:
        return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])
    except np.linalg.LinAlgError as exc:
        raise NumericsError(str(exc)) from exc


def spectral_norm(M):
    arr = np.asarray(M, dtype=float)
    if arr.ndim < 2:
        arr = arr.reshape(1, -1) if arr.ndim == 1 else arr.reshape(1, 1)
    if arr.size == 0:
        return 0.0
    return float(np.linalg.norm(arr, 2))


def default_tol(M):
    """Relative rank tolerance ``1e-9 * max(rows, cols)``."""
    return 1e-9 * max(M.shape)


def _svd_split(M, tol):
    M = as_matrix(M)
    if tol is None:
        tol = default_tol(M)
    if tol <= 0:
        raise NumericsError("tol must be positive")
    _, s, vt = np.linalg.svd(M, full_matrices=True)
    norm = s[0] if s.size else 0.0
    r = int(np.sum(s > tol * norm)) if norm > 0 else 0
    return r, vt


def rank(M, tol=None):
    """Numerical rank: singular values above ``tol * |M|_2`` are counted."""
    r, _ = _svd_split(M, tol)
    return r


def nullspace(M, tol=None):
    """Orthonormal basis (as columns) of the numerical kernel of ``M``.

    A singular value counts as zero when it is at most ``tol * |M|_2``;
    hence ``|M v| <= tol * |M|_2`` for every returned column ``v``.
    """
    r, vt = _svd_split(M, tol)
    return vt[r:].T.copy()


def _fix_signs(rows):
    # make the largest-magnitude entry of each row positive
    for row in rows:
        k = np.argmax(np.abs(row))
        if row[k] < 0:
            row *= -1.0
    return rows


def row_space(M, tol=None):
    """Orthonormal basis (as rows) of the numerical row space of ``M``.

    Row signs are normalised so the output is reproducible.
    """
    r, vt = _svd_split(M, tol)
    return _fix_signs(vt[:r].copy())
