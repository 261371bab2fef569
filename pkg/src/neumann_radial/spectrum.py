"""Neumann eigenvalues of the Laplacian on a ball and its radial eigenfunctions.

Eigenfunctions separate as ``r**(-(N-2)/2) J_nu(z r / R) P_k(x/|x|)`` with
``nu = k + (N-2)/2`` and ``P_k`` a spherical harmonic of degree ``k``.  The
Neumann condition turns into ``k J_nu(z) - z J_{nu+1}(z) = 0`` and the
eigenvalue is ``z**2 / R**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .specfun import (
    SpecFunDomainError,
    bessel_j,
    bessel_j_root,
    find_roots,
    sphere_area,
)


@dataclass(frozen=True, order=False)
class EigenvalueRecord:
    """One Neumann eigenvalue of ``-Laplace`` on the ball of radius ``R``.

    ``ell`` is 0 for the constant mode (``z = 0``).
    """

    k: int
    ell: int
    z: float
    lam: float
    multiplicity: int

    @property
    def is_radial(self) -> bool:
        return self.k == 0

    def sort_key(self):
        return (self.lam, self.k, self.ell)


def multiplicity(N: int, k: int) -> int:
    """Dimension of the space of degree-``k`` spherical harmonics in ``R^N``."""
    if k == 0:
        return 1
    if k == 1:
        return N
    return math.comb(N + k - 1, k) - math.comb(N + k - 3, k - 2)


def _check_dim(N):
    if int(N) != N or N < 2:
        raise SpecFunDomainError(f"dimension must be an integer >= 2, got {N!r}")


@lru_cache(maxsize=4096)
def _char_roots(N: int, k: int, count: int) -> tuple:
    nu = k + 0.5 * (N - 2)
    if k == 0:
        return tuple(bessel_j_root(0.5 * N, l) for l in range(1, count + 1))

    def fn(z):
        return k * bessel_j(nu, z) - z * bessel_j(nu + 1.0, z)

    # the first root lies above sqrt(k (k + N - 2)) / 2, no sign change below
    start = 0.5 * math.sqrt(k * (k + N - 2))
    return tuple(find_roots(fn, start, count, tol=1e-13))


def char_root(N: int, k: int, ell: int) -> float:
    """``ell``-th positive root of ``z -> k J_nu(z) - z J_{nu+1}(z)``."""
    _check_dim(N)
    if k < 0 or ell < 1:
        raise SpecFunDomainError("need k >= 0 and ell >= 1")
    return _char_roots(int(N), int(k), int(ell))[ell - 1]


def radial_eigenvalue(N: int, R: float, i: int) -> float:
    """``i``-th radial Neumann eigenvalue (``i = 1`` is the constant mode)."""
    if i < 1:
        raise SpecFunDomainError("eigenvalue index starts at 1")
    if i == 1:
        return 0.0
    return char_root(N, 0, i - 1) ** 2 / R**2


def radial_eigenvalues(N: int, R: float, count: int) -> np.ndarray:
    return np.array([radial_eigenvalue(N, R, i) for i in range(1, count + 1)])


def spectrum_list(N: int, R: float, count: int) -> list[EigenvalueRecord]:
    """The ``count`` smallest distinct Neumann eigenvalues, ascending."""
    _check_dim(N)
    if count < 1:
        raise ValueError("count must be >= 1")
    records = [EigenvalueRecord(0, 0, 0.0, 0.0, 1)]
    k = 0
    while True:
        roots = _char_roots(int(N), k, count)
        for ell, z in enumerate(roots, start=1):
            records.append(EigenvalueRecord(k, ell, z, z * z / R**2, multiplicity(N, k)))
        records.sort(key=EigenvalueRecord.sort_key)
        if len(records) >= count and roots[0] ** 2 / R**2 > records[count - 1].lam:
            break
        k += 1
    return records[:count]


def morse_count(records, threshold: float, radial_only: bool = False) -> int:
    """Number of eigenvalues (with multiplicity) strictly below ``threshold``."""
    total = 0
    for rec in records:
        if rec.lam < threshold and (rec.is_radial or not radial_only):
            total += 1 if radial_only else rec.multiplicity
    return total


def _eig_data(N, R, i):
    nu = 0.5 * (N - 2)
    z = char_root(N, 0, i - 1)
    a = z / R
    # closed form of int_0^R r J_nu(a r)^2 dr; J_{nu+1}(z) = 0 kills the cross term
    norm2 = sphere_area(N) * 0.5 * R**2 * bessel_j(nu, z) ** 2
    return nu, a, 1.0 / math.sqrt(norm2)


def radial_eigenfunction(N: int, R: float, i: int, r):
    """L2-normalised radial eigenfunction with positive value at the centre.

    Parameters
    ----------
    N, R : int, float
        Dimension and ball radius.
    i : int
        Radial index; ``i = 1`` gives the constant ``|B_R|**-0.5``.
    r : float or array
        Radii in ``[0, R]``.
    """
    _check_dim(N)
    ra = np.asarray(r, dtype=float)
    if np.any(ra < 0) or np.any(ra > R * (1 + 1e-12)):
        raise SpecFunDomainError("radius outside [0, R]")
    if i == 1:
        out = np.full(ra.shape, 1.0 / math.sqrt(sphere_area(N) * R**N / N))
        return float(out) if out.ndim == 0 else out
    nu, a, c = _eig_data(N, R, i)
    flat = np.atleast_1d(ra)
    safe = np.where(flat > 0, flat, 1.0)
    vals = c * safe ** (-nu) * bessel_j(nu, a * safe)
    vals = np.where(flat > 0, vals, c * (0.5 * a) ** nu / math.gamma(nu + 1.0))
    return float(vals[0]) if ra.ndim == 0 else vals


def radial_eigenfunction_deriv(N: int, R: float, i: int, r):
    """Radial derivative of :func:`radial_eigenfunction`."""
    ra = np.asarray(r, dtype=float)
    if i == 1:
        out = np.zeros(ra.shape)
        return float(out) if out.ndim == 0 else out
    nu, a, c = _eig_data(N, R, i)
    flat = np.atleast_1d(ra)
    safe = np.where(flat > 0, flat, 1.0)
    vals = np.where(flat > 0, -c * a * safe ** (-nu) * bessel_j(nu + 1.0, a * safe), 0.0)
    return float(vals[0]) if ra.ndim == 0 else vals
