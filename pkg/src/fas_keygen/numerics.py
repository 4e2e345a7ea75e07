"""
Special-function and dense symmetric linear-algebra kernels.

Everything here is self-contained: the Bessel function uses its power
series near the origin and the Hankel asymptotic expansion further out,
and the eigensolver is a cyclic Jacobi iteration that also works on
stacks of matrices (shape ``(..., n, n)``), which is what the exhaustive
port search relies on.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotPSDError, NumericalError

__all__ = [
    "EigenDecomposition",
    "bessel_j0",
    "sym_eig",
    "sym_eigvals",
    "psd_sqrt",
    "leading_eigpair",
    "as_symmetric",
    "J0_SWITCH",
]

#: Below this argument J0 is summed from its power series, above it the
#: Hankel expansion is used. Both branches agree to ~1e-13 here.
J0_SWITCH = 11.0

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
PSD_CLAMP = 1e-8
MAX_ORDER = 1024


def _j0_series(x):
    q = -0.25 * x * x
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * k)
        total += term
        if abs(term) < 1e-17 * max(1.0, abs(total)) and k > 0.5 * x:
            return total


def _j0_hankel(x):
    # P and Q built from a_k = prod_{j<=k} (-(2j-1)^2) / (k! 8^k), truncated
    # at the smallest term of the divergent series.
    p = q = 0.0
    a = 1.0
    xk = 1.0
    prev = math.inf
    for k in range(80):
        term = a / xk
        if abs(term) > prev:
            break
        prev = abs(term)
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p += sign * term
        else:
            q += sign * term
        if abs(term) < 1e-17:
            break
        a *= -((2 * k + 1) ** 2) / ((k + 1) * 8.0)
        xk *= x
    chi = x - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def bessel_j0(x):
    """
    Zero-order Bessel function of the first kind.

    Parameters
    ----------
    x : float or array_like
        Finite real argument(s).

    Returns
    -------
    float or numpy.ndarray
        ``J0(x)``, absolute error below 1e-10 for ``|x| <= 50``.

    Raises
    ------
    DomainError
        If any argument is NaN or infinite.
    """
    if np.ndim(x) == 0:
        xf = float(x)
        if not math.isfinite(xf):
            raise DomainError(f"bessel_j0 needs a finite argument, got {x!r}")
        ax = abs(xf)
        return _j0_series(ax) if ax <= J0_SWITCH else _j0_hankel(ax)
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("bessel_j0 needs finite arguments")
    out = np.empty_like(arr)
    flat = out.reshape(-1)
    for i, v in enumerate(arr.reshape(-1)):
        flat[i] = bessel_j0(v)
    return out


@dataclass(frozen=True)
class EigenDecomposition:
    """Spectrum of a real symmetric matrix, sorted in descending order.

    ``vectors[:, k]`` is the unit eigenvector for ``values[k]``; each column's
    first component with magnitude above 1e-12 is positive.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def lambda_max(self):
        return float(self.values[0])

    @property
    def lambda_min(self):
        return float(self.values[-1])

    def reconstruct(self):
        return (self.vectors * self.values) @ self.vectors.T


def as_symmetric(a):
    """Return ``a`` as a float array after checking it is square and exactly symmetric."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2]:
        raise DomainError(f"expected square matrices, got shape {arr.shape}")
    if arr.shape[-1] < 1:
        raise DomainError("matrix order must be at least 1")
    if not np.all(np.isfinite(arr)):
        raise DomainError("matrix has non-finite entries")
    if not np.array_equal(arr, np.swapaxes(arr, -1, -2)):
        raise DomainError("matrix is not exactly symmetric")
    return arr


def _off_norm(a):
    off = a.copy()
    n = a.shape[-1]
    off[..., range(n), range(n)] = 0.0
    return np.sqrt(np.sum(off * off, axis=(-2, -1)))


def _jacobi(a, max_sweeps=JACOBI_MAX_SWEEPS, tol=JACOBI_TOL):
    """Cyclic Jacobi on a stack ``(B, n, n)``. Returns (diagonal, vectors)."""
    a = a.copy()
    batch, n, _ = a.shape
    v = np.broadcast_to(np.eye(n), a.shape).copy()
    scale = np.sqrt(np.sum(a * a, axis=(-2, -1)))
    scale[scale == 0.0] = 1.0
    pairs = [(p, q) for p in range(n - 1) for q in range(p + 1, n)]
    for _ in range(max_sweeps):
        off = _off_norm(a)
        if np.all(off <= tol * scale):
            break
        for p, q in pairs:
            apq = a[:, p, q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            app = a[:, p, p]
            aqq = a[:, q, q]
            with np.errstate(all="ignore"):
                tau = np.where(active, (aqq - app) / (2.0 * apq), 0.0)
                t = np.where(
                    tau >= 0.0,
                    1.0 / (tau + np.sqrt(1.0 + tau * tau)),
                    -1.0 / (-tau + np.sqrt(1.0 + tau * tau)),
                )
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            cc = c[:, None]
            ss = s[:, None]
            colp = a[:, :, p].copy()
            colq = a[:, :, q]
            a[:, :, p] = cc * colp - ss * colq
            a[:, :, q] = ss * colp + cc * colq
            rowp = a[:, p, :].copy()
            rowq = a[:, q, :]
            a[:, p, :] = cc * rowp - ss * rowq
            a[:, q, :] = ss * rowp + cc * rowq
            a[:, p, q] = 0.0
            a[:, q, p] = 0.0
            vp = v[:, :, p].copy()
            vq = v[:, :, q]
            v[:, :, p] = cc * vp - ss * vq
            v[:, :, q] = ss * vp + cc * vq
    else:
        off = _off_norm(a)
        if np.any(off > tol * scale):
            worst = float(np.max(off / scale))
            raise NumericalError(
                f"Jacobi iteration did not converge in {max_sweeps} sweeps "
                f"(relative off-diagonal norm {worst:.3e})",
                residual=worst,
            )
    return np.diagonal(a, axis1=-2, axis2=-1).copy(), v


def _canonical_signs(vectors):
    # flip each column so its first component above 1e-12 in magnitude is positive
    mask = np.abs(vectors) > 1e-12
    first = np.argmax(mask, axis=-2)
    lead = np.take_along_axis(vectors, first[..., None, :], axis=-2)
    signs = np.where(lead < 0.0, -1.0, 1.0)
    return vectors * signs


def sym_eig(a):
    """
    Full eigendecomposition of a real symmetric matrix (or a stack of them).

    Parameters
    ----------
    a : array_like, shape (n, n) or (..., n, n)
        Exactly symmetric matrices with ``n <= 1024``.

    Returns
    -------
    EigenDecomposition
        Eigenvalues sorted descending along the last axis and matching
        eigenvector columns.

    Raises
    ------
    NumericalError
        If the Jacobi sweeps fail to reduce the off-diagonal mass below
        ``1e-12`` of the Frobenius norm within 100 sweeps.
    """
    arr = as_symmetric(a)
    n = arr.shape[-1]
    if n > MAX_ORDER:
        raise DomainError(f"order {n} exceeds the supported maximum {MAX_ORDER}")
    lead_shape = arr.shape[:-2]
    vals, vecs = _jacobi(arr.reshape(-1, n, n))
    order = np.argsort(-vals, axis=-1, kind="stable")
    vals = np.take_along_axis(vals, order, axis=-1)
    vecs = np.take_along_axis(vecs, order[:, None, :], axis=-1)
    vecs = _canonical_signs(vecs)
    return EigenDecomposition(
        values=vals.reshape(lead_shape + (n,)),
        vectors=vecs.reshape(lead_shape + (n, n)),
    )


def sym_eigvals(a):
    """Descending eigenvalues only; same contract as :func:`sym_eig`."""
    return sym_eig(a).values


def psd_sqrt(a, eig=None):
    """
    Symmetric square root of a (near) positive semidefinite matrix.

    Eigenvalues in ``[-1e-8 * lambda_max, 0)`` are clamped to zero so that
    numerically indefinite covariance models still factor.

    Parameters
    ----------
    a : array_like, shape (n, n)
    eig : EigenDecomposition, optional
        Precomputed decomposition of ``a``.

    Returns
    -------
    numpy.ndarray
        ``S`` with ``S @ S.T`` equal to the clamped matrix.
    """
    arr = as_symmetric(a)
    if eig is None:
        eig = sym_eig(arr)
    lam = eig.values
    lam_max = max(float(lam[0]), 0.0)
    if lam[-1] < -PSD_CLAMP * lam_max or (lam_max == 0.0 and lam[-1] < 0.0):
        raise NotPSDError(
            f"smallest eigenvalue {lam[-1]:.3e} is below -{PSD_CLAMP:g} * lambda_max"
        )
    root = np.sqrt(np.clip(lam, 0.0, None))
    s = (eig.vectors * root) @ eig.vectors.T
    return 0.5 * (s + s.T)


def leading_eigpair(a, eig=None):
    """
    Largest eigenvalue and its unit eigenvector.

    The eigenvector's first nonzero component is positive; among equal
    eigenvalues the one whose Jacobi column comes first is returned, so the
    identity yields the first basis vector.

    Returns
    -------
    (float, numpy.ndarray)
    """
    if eig is None:
        eig = sym_eig(a)
    return float(eig.values[0]), eig.vectors[:, 0].copy()
