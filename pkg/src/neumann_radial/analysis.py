"""Bifurcation coefficients, a Bessel cubic integral verifier and Morse indices.

Coefficients follow the Crandall-Rabinowitz normal form at ``(param*, 1)``:
``a`` multiplies ``(param - param*) s``, ``b`` multiplies ``s**2`` and ``c``
multiplies ``s**3`` when ``b`` vanishes.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.integrate import quad, solve_ivp
from scipy.linalg import eigh_tridiagonal

from .radial_ode import NonlinearityDescriptor, RadialProfile
from .specfun import bessel_j, find_roots, sphere_area
from .spectrum import char_root, radial_eigenfunction, radial_eigenvalue, spectrum_list


@dataclass
class BifurcationCoefficients:
    context: str
    N: int
    R: float
    i: int | None
    a: float
    b: float | None = None
    c: float | None = None
    quadratures: dict = field(default_factory=dict)

    def row(self):
        def fmt(x):
            return "nan" if x is None else f"{x:.12g}"

        return f"{self.context} {self.N} {self.R:.12g} {self.i if self.i is not None else '-'} " \
               f"{fmt(self.a)} {fmt(self.b)} {fmt(self.c)}"


COEFF_HEADER = "# context N R i a b c"


def coeff_a(context: str, N: int = 2, R: float = 1.0, i: int = 2) -> float:
    """Coefficient of the mixed term; ``-1`` for the power family, ``lambda_i`` for eps."""
    if context in ("radial-p", "one-dim", "nonradial-first"):
        return -1.0
    if context == "radial-eps":
        return radial_eigenvalue(N, R, i)
    raise ValueError(f"unknown context {context!r}")


# ---------------------------------------------------------------- Gauss panels

_GL20_X, _GL20_W = np.polynomial.legendre.leggauss(20)


def _gl_panels(edges):
    """Nodes and weights of 20-point Gauss-Legendre on each panel."""
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (a + b) + 0.5 * (b - a) * _GL20_X
    w = 0.5 * (b - a) * _GL20_W
    return x, w


def _split_edges(points, max_len):
    """Refine breakpoints so that no panel is longer than ``max_len``."""
    out = [points[0]]
    for a, b in zip(points[:-1], points[1:]):
        n = max(1, int(math.ceil((b - a) / max_len)))
        out.extend(np.linspace(a, b, n + 1)[1:])
    return np.array(out)


def _signed_pow(y, beta):
    return np.sign(y) * np.abs(y) ** beta


def reduced_cubic_integral(nu: float, upper: float) -> float:
    """``int_0^upper t**(1-nu) J_nu(t)**3 dt`` on panels split at the zeros of ``J_nu``."""
    roots = [z for z in _bessel_zeros_below(nu, upper)]
    edges = _split_edges(np.array([0.0] + roots + [upper]), 1.0)
    x, w = _gl_panels(edges)
    vals = x ** (1.0 - nu) * bessel_j(nu, x.ravel()).reshape(x.shape) ** 3
    return float(np.sum(w * vals))


def _bessel_zeros_below(nu, upper):
    out = []
    count = max(1, int(upper / math.pi) + 2)
    for z in find_roots(lambda t: bessel_j(nu, t), max(nu, 1.0), count):
        if z < upper:
            out.append(z)
    return out


# -------------------------------------------------------------- b coefficients

def cubic_integral_direct(N: int, R: float, i: int) -> float:
    """``int_{B_R} phi_i**3`` by adaptive quadrature of the normalised eigenfunction."""
    z = char_root(N, 0, i - 1)
    nu = 0.5 * (N - 2)
    # zeros of phi_i are the zeros of J_nu(z r / R) below R
    brk = [R * t / z for t in _bessel_zeros_below(nu, z)]
    edges = [0.0] + brk + [R]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = quad(lambda r: radial_eigenfunction(N, R, i, r) ** 3 * r ** (N - 1), a, b,
                      epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
    return sphere_area(N) * total


def cubic_integral_reduced(N: int, R: float, i: int) -> float:
    """``int_{B_R} phi_i**3`` via ``|S| c**3 a**(nu-2) int_0^z t**(1-nu) J_nu**3``."""
    z = char_root(N, 0, i - 1)
    nu = 0.5 * (N - 2)
    a = z / R
    S = sphere_area(N)
    c = 1.0 / math.sqrt(S * 0.5 * R**2 * bessel_j(nu, z) ** 2)
    return S * c**3 * a ** (nu - 2.0) * reduced_cubic_integral(nu, z)


def coeff_b_radial(N: int, R: float, i: int, both: bool = True) -> BifurcationCoefficients:
    """``b = -(1 + lam) lam int phi_i**3 / 2`` for the radial power family.

    Both quadrature routes are evaluated; their relative disagreement is
    stored under ``quadratures['path_rel_diff']``.
    """
    if i < 2:
        raise ValueError("radial bifurcation index starts at 2")
    lam = radial_eigenvalue(N, R, i)
    red = cubic_integral_reduced(N, R, i)
    q = {"int_phi3_reduced": red, "lambda": lam}
    if both:
        direct = cubic_integral_direct(N, R, i)
        q["int_phi3_direct"] = direct
        q["path_rel_diff"] = abs(direct - red) / max(abs(red), 1e-300)
    b = -0.5 * (1.0 + lam) * lam * red
    return BifurcationCoefficients("radial-p", N, R, i, -1.0, b, None, q)


def coeff_b_eps(N: int, R: float, f: NonlinearityDescriptor, i: int) -> BifurcationCoefficients:
    """``b = f''(1) / (2 lam_i) int phi_i**3`` for the eps family."""
    lam = radial_eigenvalue(N, R, i)
    cube = cubic_integral_reduced(N, R, i)
    fpp = float(f.fsecond(1.0))
    b = fpp / (2.0 * lam) * cube
    return BifurcationCoefficients("radial-eps", N, R, i, lam, b, None,
                                   {"int_phi3": cube, "f_second": fpp, "lambda": lam})


def coeff_c_1d(R: float, i: int) -> float:
    """Cubic coefficient for the interval ``(-R, R)``.

    ``i`` counts the non-constant eigenfunctions, ``lam = (i pi / (2R))**2``.
    """
    if not R > 0 or i < 1:
        raise ValueError("need R > 0 and i >= 1")
    pi = math.pi
    return (pi**2 * i**2 / (12 * R**3) + 5 * pi**4 * i**4 / (192 * R**5)
            + pi**6 * i**6 / (768 * R**7))


# ---------------------------------------------------- first non-radial c

_NONRAD_LOCK = threading.Lock()
_NONRAD_CACHE: dict = {}


def _first_nonradial_root(N: int) -> float:
    if N >= 2:
        return char_root(N, 1, 1)
    # interval case: the odd mode sin(z x) with cos z = 0
    nu = 0.5 * N
    return find_roots(lambda z: bessel_j(nu, z) - z * bessel_j(nu + 1.0, z), 0.1, 1, step=0.05)[0]


def sphere_moment_2(N: int) -> float:
    """Integral of ``(x1/r)**2`` over the unit sphere."""
    return sphere_area(N) / N


def sphere_moment_4(N: int) -> float:
    """Integral of ``(x1/r)**4`` over the unit sphere."""
    return 3.0 * sphere_area(N) / (N * (N + 2.0))


def nonradial_alpha_beta(N: int) -> dict:
    """Unit-ball quantities ``alpha = int phi**4`` and ``beta = -3 lam int phi**2 w``.

    ``phi = g(r) x1/r`` is the normalised first non-radial eigenfunction and
    ``w`` solves ``-Laplace w - lam w = phi**2`` with Neumann data.  The source
    splits into a radial part ``g**2 / N`` and the degree-2 harmonic part
    ``g**2 (x1**2/r**2 - 1/N)``; each gives a radial boundary-value problem
    solved as a regular particular solution plus a multiple of the regular
    homogeneous solution fixing ``w'(1) = 0``.
    """
    with _NONRAD_LOCK:
        if N in _NONRAD_CACHE:
            return _NONRAD_CACHE[N]
    z = _first_nonradial_root(N)
    lam = z * z
    nu = 0.5 * N
    S = sphere_area(N)
    g1 = (0.5 * z) ** nu / math.gamma(nu + 1.0)

    def gt(r):
        return r ** (1.0 - nu) * bessel_j(nu, z * r)

    two_part = N > 1

    def rhs(r, y):
        g2 = gt(r) ** 2
        d = N - 1.0
        w0, w0p, h0, h0p, w2, w2p, h2, h2p = y[:8]
        out = [
            w0p, -d / r * w0p - lam * w0 - g2 / N,
            h0p, -d / r * h0p - lam * h0,
            w2p, -d / r * w2p + 2 * N / r**2 * w2 - lam * w2 - g2,
            h2p, -d / r * h2p + 2 * N / r**2 * h2 - lam * h2,
        ]
        rn = r ** (N - 1)
        # accumulators: int g^2, int g^4, int g^2 w0p, int g^2 h0, int g^2 w2p, int g^2 h2
        out += [rn * g2, rn * g2 * g2, rn * g2 * w0, rn * g2 * h0, rn * g2 * w2, rn * g2 * h2]
        return out

    r0 = 1e-5
    a4 = -g1**2 / (N * (4.0 * N + 8.0))
    a2 = -g1**2 / (2.0 * N + 8.0)
    b2 = -lam / (2.0 * N + 8.0)
    y0 = [
        a4 * r0**4, 4 * a4 * r0**3,
        1 - lam * r0**2 / (2 * N), -lam * r0 / N,
        a2 * r0**4, 4 * a2 * r0**3,
        r0**2 + b2 * r0**4, 2 * r0 + 4 * b2 * r0**3,
        g1**2 * r0 ** (N + 2) / (N + 2), 0.0, 0.0, g1**2 * r0 ** (N + 2) / (N + 2), 0.0, 0.0,
    ]
    sol = solve_ivp(rhs, (r0, 1.0), y0, method="DOP853", rtol=1e-12, atol=1e-15)
    if not sol.success:
        raise RuntimeError(f"non-radial source problem failed: {sol.message}")
    y = sol.y[:, -1]
    I_g2, I_g4 = y[8], y[9]
    C0 = -y[1] / y[3]
    I0 = y[10] + C0 * y[11]
    if two_part:
        C2 = -y[5] / y[7]
        I2 = y[12] + C2 * y[13]
    else:
        I2 = 0.0
    # normalisation: (S/N) c^2 int g^2 r^{N-1} = 1; w scales with c^2
    c2 = N / (S * I_g2)
    m2, m4 = sphere_moment_2(N), sphere_moment_4(N)
    alpha = c2**2 * I_g4 * m4
    # the harmonic part pairs with (x1/r)**2 - 1/N, whose square integrates to m4 - m2/N
    int_phi2_w = c2**2 * (I0 * m2 + I2 * (m4 - m2 / N))
    beta = -3.0 * lam * int_phi2_w
    res = {"lambda_bar": lam, "z": z, "alpha": alpha, "beta": beta, "int_phi2_w": int_phi2_w}
    with _NONRAD_LOCK:
        _NONRAD_CACHE.setdefault(N, res)
        return _NONRAD_CACHE[N]


def c_from_alpha_beta(lam_bar, alpha, beta, N, R):
    """Cubic coefficient on ``B_R`` from the unit-ball data."""
    lr = lam_bar / R**2
    return (1.0 / 6.0) * lam_bar * R ** (-(N + 2.0)) * (1.0 + lr) * ((beta - alpha) * lr + beta + alpha)


def coeff_c_nonradial_first(N: int, R: float) -> BifurcationCoefficients:
    """Cubic coefficient at the first non-radial bifurcation ``p = 2 + lambda_2(B_R)``.

    ``quadratures['scaled_c']`` holds ``R**(N+2) c``.
    """
    d = nonradial_alpha_beta(N)
    c = c_from_alpha_beta(d["lambda_bar"], d["alpha"], d["beta"], N, R)
    q = dict(d)
    q["scaled_c"] = c * R ** (N + 2.0)
    return BifurcationCoefficients("nonradial-first", N, R, None, -1.0, 0.0, c, q)


def critical_radius(N: int) -> float:
    """Radius where ``2 + lambda_2(B_R)`` equals ``2N/(N-2)``."""
    if N <= 2:
        raise ValueError("critical exponent finite only for N >= 3")
    return math.sqrt(nonradial_alpha_beta(N)["lambda_bar"] * (N - 2.0) / 4.0)


# ------------------------------------------------------- Bessel cubic lemma

@dataclass
class LemmaScan:
    nu: float
    alpha: float
    beta: float
    x_max: float
    min_value: float
    argmin: float
    final_value: float
    tail_estimate: float
    x: np.ndarray = field(repr=False)
    cumulative: np.ndarray = field(repr=False)
    root_values: np.ndarray = field(repr=False)


def lemma_integral_scan(nu: float, alpha: float, beta: float, x_max: float = 60.0,
                        samples: int = 4) -> LemmaScan:
    """Cumulative ``int_0^x s**alpha sign(J_nu) |J_nu|**beta ds`` for ``x <= x_max``.

    Panels are split at the zeros of ``J_nu`` and subdivided into ``samples``
    pieces per unit length.  Near the origin the integrand behaves like
    ``s**e`` with ``e = alpha + nu beta``; the first panel is graded
    geometrically toward 0 and the innermost piece uses the substitution
    ``s = x1 t**(1/(e+1))``.  ``min_value`` is the minimum
    of the cumulative integral at grid points past the first zero;
    ``tail_estimate`` averages the cumulative integral over the last ``2 pi``.
    """
    e = alpha + nu * beta
    if e <= -1:
        raise ValueError(f"integrand not integrable at 0: alpha + nu beta = {e}")
    roots = _bessel_zeros_below(nu, x_max)
    first = min(1.0, roots[0] if roots else x_max)

    def integrand(s):
        return s**alpha * _signed_pow(bessel_j(nu, s), beta)

    # first panel: panels graded toward 0, and on the innermost one the
    # leading power is absorbed by the substitution
    inner = first * 2.0**-30
    m = 1.0 / (e + 1.0)
    t, wt = _gl_panels(np.array([0.0, 1.0]))
    t, wt = t.ravel(), wt.ravel()
    s = inner * t**m
    jac = inner * m * t ** (m - 1.0)
    head = float(np.sum(wt * integrand(s) * jac))
    xg, wg = _gl_panels(first * np.geomspace(2.0**-30, 1.0, 31))
    head += float(np.sum(wg * integrand(xg.ravel()).reshape(xg.shape)))

    edges = _split_edges(np.array([first] + [r for r in roots if r > first] + [x_max]), 1.0 / samples)
    x, w = _gl_panels(edges)
    vals = x.ravel() ** alpha * _signed_pow(bessel_j(nu, x.ravel()), beta)
    panel = np.sum(w * vals.reshape(x.shape), axis=1)
    cum = head + np.concatenate([[0.0], np.cumsum(panel)])
    xs = edges
    past = xs >= (roots[0] if roots else x_max)
    j = int(np.argmin(np.where(past, cum, np.inf)))
    root_vals = np.array([cum[np.argmin(np.abs(xs - r))] for r in roots])
    window = xs >= x_max - 2 * math.pi
    tail = float(np.trapezoid(cum[window], xs[window]) / (xs[window][-1] - xs[window][0]))
    return LemmaScan(nu, alpha, beta, x_max, float(cum[j]), float(xs[j]), float(cum[-1]),
                     tail, xs, cum, root_vals)


def j_cubed_tail(nu: float) -> float:
    """Closed form of ``int_0^inf x**(1-nu) J_nu(x)**3 dx``."""
    if nu < 0:
        raise ValueError("nu must be non-negative")
    return 2.0 ** (nu - 1.0) * (3.0 / 16.0) ** (nu - 0.5) / (math.sqrt(math.pi) * math.gamma(nu + 0.5))


# ------------------------------------------------------------- Morse indices

@dataclass
class MorseIndexResult:
    index: int
    degenerate: bool
    min_abs_eig: float | None = None
    meshes: tuple = ()
    stable: bool = True

    def __int__(self):
        return self.index


def morse_index_constant(N: int, R: float, p: float, radial_only: bool = False) -> MorseIndexResult:
    """Morse index of ``u = 1``: eigenvalues of ``-Laplace`` strictly below ``p - 2``.

    ``degenerate`` flags ``|lambda - (p - 2)| < 1e-10`` for some eigenvalue.
    """
    if not p > 2:
        raise ValueError("need p > 2")
    thr = p - 2.0
    count = 8
    while True:
        if radial_only:
            lams = [radial_eigenvalue(N, R, i) for i in range(1, count + 1)]
            recs = None
        else:
            recs = spectrum_list(N, R, count)
            lams = [r.lam for r in recs]
        if lams[-1] > thr + 1.0:
            break
        count *= 2
    gap = min(abs(l - thr) for l in lams)
    if radial_only:
        idx = sum(1 for l in lams if l < thr)
    else:
        idx = sum(r.multiplicity for r in recs if r.lam < thr)
    return MorseIndexResult(idx, gap < 1e-10, gap)


@njit(cache=True)
def _neg_pivots(diag, off):
    """Negative pivots of the LDL^T factorisation of a symmetric tridiagonal matrix."""
    n = diag.shape[0]
    neg = 0
    d = diag[0]
    tiny = 1e-300
    if d < 0:
        neg += 1
    for j in range(1, n):
        if d == 0.0:
            d = tiny
        d = diag[j] - off[j - 1] * off[j - 1] / d
        if d < 0:
            neg += 1
    return neg


def _linearised_matrix(profile: RadialProfile, n: int):
    """Finite-volume symmetric pencil ``(A, W)`` for the radial linearisation."""
    problem = profile.problem
    N, R, eps = problem.N, profile.r_end, problem.eps
    r = np.linspace(0.0, R, n)
    h = r[1] - r[0]
    u, _ = profile.evaluate(r)
    fp = problem.nonlin.fprime(u)
    lo = np.maximum(r - 0.5 * h, 0.0)
    hi = np.minimum(r + 0.5 * h, R)
    W = (hi**N - lo**N) / N
    flux = eps * (0.5 * (r[:-1] + r[1:])) ** (N - 1) / h
    diag = W * (1.0 - fp)
    diag[:-1] += flux
    diag[1:] += flux
    return diag, -flux, W


def morse_index_radial(profile: RadialProfile, meshes=(2001, 4001), max_mesh: int = 64001,
                       near_zero: float = 1e-6) -> MorseIndexResult:
    """Number of negative eigenvalues of the radial linearisation at ``profile``.

    The operator ``-eps (v'' + (N-1)/r v') + (1 - f'(u)) v`` with Neumann data
    is discretised in weighted finite-volume form; the count is the inertia
    of the stiffness matrix (Sylvester).  Meshes are doubled until two
    consecutive counts agree.  ``degenerate`` is set when the eigenvalue
    closest to zero is below ``near_zero`` in magnitude.
    """
    counts = []
    used = []
    n = meshes[0]
    diag = off = W = None
    while True:
        diag, off, W = _linearised_matrix(profile, n)
        counts.append(int(_neg_pivots(diag, off)))
        used.append(n)
        if len(counts) >= 2 and counts[-1] == counts[-2]:
            stable = True
            break
        if n >= max_mesh:
            stable = False
            break
        n = 2 * n - 1
    idx = counts[-1]
    # symmetric scaling W^{-1/2} A W^{-1/2} for the eigenvalue nearest zero
    sw = 1.0 / np.sqrt(W)
    d = diag * sw * sw
    e = off * sw[:-1] * sw[1:]
    lo = max(idx - 1, 0)
    hi = min(idx, len(d) - 1)
    vals = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(lo, hi))
    mn = float(np.min(np.abs(vals)))
    return MorseIndexResult(idx, mn < near_zero, mn, tuple(used), stable)


def write_coefficient_table(rows, path):
    from .io_utils import atomic_write_text

    text = COEFF_HEADER + "\n" + "\n".join(r.row() for r in rows) + "\n"
    atomic_write_text(path, text)
