"""Double-precision Gamma and Bessel J of real non-negative order.

Bessel values are evaluated in one of three regimes:

* ascending power series for small arguments (or when the order dominates),
* the Hankel large-argument expansion when ``x`` is large compared to ``nu**2``,
* Miller's backward recurrence, normalised with the Neumann-type identity
  ``(x/2)**mu = sum_k (mu + 2k) Gamma(mu + k) / k! * J_{mu+2k}(x)``,
  for everything in between.

All functions accept scalars or numpy arrays for ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit


class SpecFunDomainError(ValueError):
    """Argument outside the supported domain."""


@dataclass(frozen=True)
class SpecFunConfig:
    series_cutoff: float = 5.0
    root_tol: float = 1e-13
    max_terms: int = 400

    def __post_init__(self):
        if not self.series_cutoff > 0:
            raise ValueError("series_cutoff must be positive")
        if not 0 < self.root_tol <= 1e-10:
            raise ValueError("root_tol must lie in (0, 1e-10]")
        if self.max_terms < 10:
            raise ValueError("max_terms too small")


DEFAULT_CONFIG = SpecFunConfig()


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments."""
    if not x > 0:
        raise SpecFunDomainError(f"gamma_fn requires x > 0, got {x!r}")
    return math.gamma(x)


@njit(cache=True)
def _series(nu, x, max_terms):
    # sum_k (-1)^k (x/2)^(2k+nu) / (k! Gamma(k+nu+1))
    out = np.empty_like(x)
    lg = math.lgamma(nu + 1.0)
    for q in range(x.shape[0]):
        half = 0.5 * x[q]
        if half == 0.0:
            out[q] = 1.0 if nu == 0 else 0.0
            continue
        term = math.exp(nu * math.log(half) - lg)
        total = term
        mult = -half * half
        for k in range(1, max_terms):
            term = term * mult / (k * (k + nu))
            total += term
            if k > 2 and abs(term) <= 1e-17 * abs(total):
                break
        out[q] = total
    return out


@njit(cache=True)
def _hankel(nu, x, nterms=40):
    # large-argument expansion with P, Q truncated at the smallest term
    mu = 4.0 * nu * nu
    out = np.empty_like(x)
    for q_ in range(x.shape[0]):
        xv = x[q_]
        inv8x = 1.0 / (8.0 * xv)
        p = 1.0
        q = 0.0
        a = 1.0
        last = np.inf
        for k in range(1, nterms):
            a = a * (mu - (2 * k - 1) ** 2) * inv8x / k
            if abs(a) >= last:
                break
            last = abs(a)
            sign = -1.0 if (k // 2) % 2 else 1.0
            if k % 2 == 1:
                q += sign * a
            else:
                p += sign * a
            if a == 0.0:
                break
        omega = xv - (0.5 * nu + 0.25) * math.pi
        out[q_] = math.sqrt(2.0 / (math.pi * xv)) * (p * math.cos(omega) - q * math.sin(omega))
    return out


@njit(cache=True)
def _miller_one(nu, x):
    n_int = int(math.floor(nu))
    mu = nu - n_int
    start = int(max(x, nu) + 30 + 10 * x ** (1.0 / 3.0))
    start += start % 2
    big = 1e250
    j_next = 0.0
    j_cur = 1e-300
    norm = 0.0
    target = 0.0
    # weight for J_{mu+2k}: (mu + 2k) Gamma(mu + k) / k!, ratio updated downward
    kk = start // 2
    ratio = math.exp(math.lgamma(mu + kk) - math.lgamma(kk + 1.0)) if mu != 0 else 1.0 / kk
    for m in range(start, -1, -1):
        if m == n_int:
            target = j_cur
        if m % 2 == 0:
            k = m // 2
            if k == 0:
                w = 1.0 if mu == 0 else math.gamma(mu + 1.0)
            else:
                w = (mu + 2 * k) * ratio
                ratio *= k / (mu + k - 1.0) if mu + k - 1.0 > 0 else 0.0
            norm += w * j_cur
        if m == 0:
            break
        j_prev = (2.0 * (mu + m) / x) * j_cur - j_next
        j_next = j_cur
        j_cur = j_prev
        if abs(j_cur) > big:
            j_cur /= big
            j_next /= big
            norm /= big
            target /= big
    lhs = math.exp(mu * math.log(0.5 * x)) if mu != 0 else 1.0
    return target * lhs / norm


@njit(cache=True)
def _miller(nu, x):
    """Backward recurrence for J_nu at x > 0."""
    out = np.empty_like(x)
    for q in range(x.shape[0]):
        out[q] = _miller_one(nu, x[q])
    return out


def _bessel_scalar(nu, x, config):
    if not (x >= 0 and math.isfinite(x)):
        raise SpecFunDomainError("argument must be finite and non-negative")
    xa = np.array([x])
    if x <= config.series_cutoff or 0.25 * x * x <= nu + 1.0:
        return float(_series(nu, xa, config.max_terms)[0])
    if x >= 25.0 and x >= 2.0 * nu * nu:
        return float(_hankel(nu, xa)[0])
    return _miller_one(nu, x)


def bessel_j(nu: float, x, config: SpecFunConfig = DEFAULT_CONFIG):
    """Bessel function of the first kind ``J_nu(x)`` for ``nu >= 0``, ``x >= 0``."""
    if nu < 0:
        raise SpecFunDomainError(f"order must be non-negative, got {nu!r}")
    if isinstance(x, (float, int)) and not isinstance(x, bool):
        return _bessel_scalar(float(nu), float(x), config)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(~np.isfinite(xa)):
        raise SpecFunDomainError("argument must be finite and non-negative")
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    out = np.empty_like(xa)

    use_series = (xa <= config.series_cutoff) | (0.25 * xa * xa <= nu + 1.0)
    use_hankel = ~use_series & (xa >= 25.0) & (xa >= 2.0 * nu * nu)
    use_miller = ~use_series & ~use_hankel
    if use_series.any():
        out[use_series] = _series(float(nu), np.ascontiguousarray(xa[use_series]), config.max_terms)
    if use_hankel.any():
        out[use_hankel] = _hankel(float(nu), np.ascontiguousarray(xa[use_hankel]))
    if use_miller.any():
        out[use_miller] = _miller(float(nu), np.ascontiguousarray(xa[use_miller]))
    return float(out[0]) if scalar else out


def bessel_j_deriv(nu: float, x, config: SpecFunConfig = DEFAULT_CONFIG):
    """Derivative ``J_nu'(x)`` via ``(nu/x) J_nu - J_{nu+1}``."""
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    zero = xa == 0
    if zero.any() and nu < 1:
        raise SpecFunDomainError("J_nu'(0) is not available for nu < 1")
    safe = np.where(zero, 1.0, xa)
    out = (nu / safe) * bessel_j(nu, safe, config) - bessel_j(nu + 1.0, safe, config)
    out = np.where(zero, 0.5 if nu == 1 else 0.0, out)
    return float(out[0]) if scalar else out


def find_roots(func, start: float, count: int, step: float = math.pi / 4,
               tol: float = DEFAULT_CONFIG.root_tol, deriv=None, max_scan: int = 100000):
    """First ``count`` sign changes of ``func`` on ``(start, inf)``.

    Brackets are found by scanning with a fixed step and refined by bisection,
    followed by a Newton polish when ``deriv`` is given.
    """
    roots = []
    a = start
    fa = func(a)
    for _ in range(max_scan):
        if len(roots) >= count:
            break
        b = a + step
        fb = func(b)
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(_refine(func, a, b, fa, tol, deriv))
        a, fa = b, fb
    else:
        raise RuntimeError("root scan did not terminate")
    return roots


def _refine(func, a, b, fa, tol, deriv):
    lo, hi, flo = a, b, fa
    while hi - lo > max(tol, 4e-16 * hi):
        mid = 0.5 * (lo + hi)
        fm = func(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0:
            hi = mid
        else:
            lo, flo = mid, fm
    z = 0.5 * (lo + hi)
    if deriv is not None:
        d = deriv(z)
        if d != 0:
            znew = z - func(z) / d
            if abs(znew - z) <= hi - lo + tol:
                z = znew
    return z


def bessel_j_root(nu: float, ell: int, config: SpecFunConfig = DEFAULT_CONFIG) -> float:
    """``ell``-th positive zero of ``J_nu``."""
    if nu < 0:
        raise SpecFunDomainError(f"order must be non-negative, got {nu!r}")
    if ell < 1:
        raise SpecFunDomainError("root index must be >= 1")
    roots = find_roots(
        lambda z: bessel_j(nu, z, config),
        max(nu, 1.0),
        ell,
        tol=config.root_tol,
        deriv=lambda z: bessel_j_deriv(nu, z, config),
    )
    return roots[ell - 1]


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere ``S^{N-1}``."""
    return 2.0 * math.pi ** (0.5 * N) / math.gamma(0.5 * N)


def ball_volume(N: int, R: float) -> float:
    return sphere_area(N) * R**N / N
