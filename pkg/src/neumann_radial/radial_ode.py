"""Radial initial-value problem for ``-eps (u'' + (N-1)/r u') + u = f(u)``.

The pure-power problem ``-Laplace u + u = |u|**(p-2) u`` is the special case
``eps = 1`` and ``f(u) = |u|**(p-2) u``.  The constant state ``u = 1`` is a
solution in every case.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import _dopri
from .io_utils import atomic_write_json, atomic_write_text, format_columns
from .specfun import sphere_area

FIX_POINT = 1.0


class BlowUpError(RuntimeError):
    """Trajectory left the admissible range before reaching the end radius."""

    def __init__(self, msg, r_stop=None, direction=0.0):
        super().__init__(msg)
        self.r_stop = r_stop
        self.direction = direction


class StepFailureError(RuntimeError):
    """Step size underflow or step budget exhausted."""


class NonlinearityError(ValueError):
    pass


@dataclass(frozen=True)
class NonlinearityDescriptor:
    """Odd nonlinearity ``f(u) = sum_m coef[m] * sign(u) |u|**expo[m]``.

    ``kind`` is ``"power"`` for ``f(u) = |u|**(p-2) u`` (``eps`` fixed to 1)
    and ``"general"`` otherwise.
    """

    kind: str
    coef: tuple
    expo: tuple
    eps: float = 1.0
    name: str = ""

    def __post_init__(self):
        if len(self.coef) != len(self.expo) or not self.coef:
            raise NonlinearityError("coefficient and exponent lists must be non-empty and aligned")
        if not self.eps > 0:
            raise NonlinearityError("diffusion eps must be positive")
        if self.kind == "power":
            if not self.p > 2:
                raise NonlinearityError(f"pure power needs p > 2, got p = {self.p}")
            return
        if any(e <= 1 for e in self.expo):
            raise NonlinearityError("exponents must exceed 1 so that f'(0) = 0")
        if abs(self.f(1.0) - 1.0) > 1e-12:
            raise NonlinearityError(f"need f(1) = 1, got {self.f(1.0)!r}")
        if not self.fprime(1.0) > 1:
            raise NonlinearityError(f"need f'(1) > 1, got {self.fprime(1.0)!r}")

    @classmethod
    def pure_power(cls, p: float):
        return cls("power", (1.0,), (float(p) - 1.0,), 1.0, f"power:{p:g}")

    @classmethod
    def general(cls, coef, expo, eps: float = 1.0, name: str = ""):
        return cls("general", tuple(float(c) for c in coef), tuple(float(e) for e in expo),
                   float(eps), name)

    @property
    def p(self) -> float:
        if self.kind != "power":
            raise AttributeError("exponent p only defined for the pure power")
        return self.expo[0] + 1.0

    def with_eps(self, eps: float) -> "NonlinearityDescriptor":
        return replace(self, eps=float(eps))

    def with_p(self, p: float) -> "NonlinearityDescriptor":
        return NonlinearityDescriptor.pure_power(p)

    @property
    def coef_array(self):
        return np.asarray(self.coef, dtype=float)

    @property
    def expo_array(self):
        return np.asarray(self.expo, dtype=float)

    def f(self, u):
        u = np.asarray(u, dtype=float)
        au = np.abs(u)
        s = sum(c * au**e for c, e in zip(self.coef, self.expo))
        return np.sign(u) * s

    def F(self, u):
        """Primitive of ``f`` with ``F(0) = 0``."""
        au = np.abs(np.asarray(u, dtype=float))
        return sum(c * au ** (e + 1.0) / (e + 1.0) for c, e in zip(self.coef, self.expo))

    def fprime(self, u):
        au = np.abs(np.asarray(u, dtype=float))
        return sum(c * e * au ** (e - 1.0) for c, e in zip(self.coef, self.expo))

    def fsecond(self, u):
        u = np.asarray(u, dtype=float)
        au = np.abs(u)
        return np.sign(u) * sum(c * e * (e - 1.0) * au ** (e - 2.0)
                                for c, e in zip(self.coef, self.expo))

    def to_dict(self):
        d = {"kind": self.kind, "name": self.name, "coef": list(self.coef),
             "expo": list(self.expo), "eps": self.eps}
        if self.kind == "power":
            d["p"] = self.p
        return d


# Stand-ins with interior critical structure of F(u) - u**2/2 on (0, 1).
# f1: u + 4 u (u - 1/2)**2 (u - 1), degenerate fixpoint at 1/2.
# f2: u + 4.5 u (u - 1/3) (u - 2/3) (u - 1), fixpoints at 1/3 and 2/3.
_REGISTRY = {
    "quadratic": ((1.0,), (2.0,)),
    "f1-like": ((5.0, -8.0, 4.0), (2.0, 3.0, 4.0)),
    "f2-like": ((5.5, -9.0, 4.5), (2.0, 3.0, 4.0)),
}


def parse_nonlinearity(spec: str, eps: float = 1.0) -> NonlinearityDescriptor:
    """Build a descriptor from a registry string.

    Accepted forms: ``power:p``, ``quadratic``, ``f1-like``, ``f2-like`` and
    ``sumpow:c1,q1;c2,q2;...`` (``f(u) = sum c_m u**q_m`` extended oddly).
    """
    spec = spec.strip()
    if spec.startswith("power:"):
        return NonlinearityDescriptor.pure_power(float(spec.split(":", 1)[1]))
    if spec in _REGISTRY:
        c, e = _REGISTRY[spec]
        return NonlinearityDescriptor.general(c, e, eps, spec)
    if spec.startswith("sumpow:"):
        body = spec.split(":", 1)[1]
        coef, expo = [], []
        for term in filter(None, re.split(r"\s*;\s*", body)):
            c, q = term.split(",")
            coef.append(float(c))
            expo.append(float(q))
        return NonlinearityDescriptor.general(coef, expo, eps, spec)
    raise NonlinearityError(f"unknown nonlinearity {spec!r}")


@dataclass(frozen=True)
class ProblemSpec:
    """Dimension ``N``, ball radius ``R`` and nonlinearity."""

    N: int
    R: float
    nonlin: NonlinearityDescriptor

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("dimension must be >= 1")
        if not self.R > 0:
            raise ValueError("radius must be positive")

    @classmethod
    def power(cls, N, R, p):
        return cls(N, float(R), NonlinearityDescriptor.pure_power(p))

    @property
    def eps(self) -> float:
        return self.nonlin.eps

    @property
    def is_power(self) -> bool:
        return self.nonlin.kind == "power"

    @property
    def param(self) -> float:
        """Continuation parameter: ``p`` for the pure power, ``eps`` otherwise."""
        return self.nonlin.p if self.is_power else self.nonlin.eps

    def with_param(self, value: float) -> "ProblemSpec":
        if self.is_power:
            return replace(self, nonlin=self.nonlin.with_p(value))
        return replace(self, nonlin=self.nonlin.with_eps(value))

    def to_dict(self):
        return {"N": self.N, "R": self.R, "nonlinearity": self.nonlin.to_dict()}


def _rhs_g(problem, u):
    return (u - problem.nonlin.f(u)) / problem.eps


def _rhs_gprime(problem, u):
    return (1.0 - problem.nonlin.fprime(u)) / problem.eps


def _taylor_start(problem, gamma):
    N = problem.N
    A = float(_rhs_g(problem, gamma)) / (2.0 * N)
    B = float(_rhs_gprime(problem, gamma)) * A / (4.0 * (N + 2.0))
    ls = 1.0 / math.sqrt(max(abs(float(_rhs_gprime(problem, gamma))), 1.0 / problem.R**2))
    r0 = min(max(1e-8, 1e-5 * problem.R), 1e-3 * ls)
    return A, B, r0, ls


# 5-point Gauss-Legendre rule on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Dense radial trajectory.

    ``r``, ``u``, ``du`` hold the integrator step points (``r[0] = 0``).
    Values in between come from :meth:`evaluate`.
    """

    problem: ProblemSpec
    gamma: float
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    taylor: tuple = (0.0, 0.0, 0.0)
    dense: np.ndarray = field(default=None, repr=False)
    tol: float = 1e-10
    shift: float = FIX_POINT

    @property
    def r_end(self) -> float:
        return float(self.r[-1])

    @property
    def is_constant(self) -> bool:
        return self.dense is None

    def evaluate(self, x):
        """``(u, u')`` at radii ``x`` (array, within the integrated range)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        order = np.argsort(x, kind="stable")
        xs = x[order]
        out = np.empty((xs.size, 2))
        if self.is_constant:
            out[:, 0] = self.gamma
            out[:, 1] = 0.0
        else:
            A, B, r0 = self.taylor
            inner = xs <= r0
            xi = xs[inner]
            out[inner, 0] = self.gamma + A * xi**2 + B * xi**4
            out[inner, 1] = 2 * A * xi + 4 * B * xi**3
            outer = ~inner
            if outer.any():
                vals = _dopri.dense_eval(self.r[1:], self.dense, np.ascontiguousarray(xs[outer]), 0)
                out[outer, 0] = vals[:, 0] + self.shift
                out[outer, 1] = vals[:, 1]
        res = np.empty_like(out)
        res[order] = out
        return res[:, 0], res[:, 1]

    @cached_property
    def fine_grid(self):
        """Step points with three interior points per step."""
        if self.is_constant:
            return np.linspace(0.0, self.r_end, 65)
        r = self.r
        sub = (r[:-1, None] + np.diff(r)[:, None] * np.array([0.0, 0.25, 0.5, 0.75])).ravel()
        return np.concatenate([sub, r[-1:]])

    @cached_property
    def fine_values(self):
        return self.evaluate(self.fine_grid)

    @cached_property
    def zero_count(self) -> int:
        """Sign changes of ``u - 1`` on ``(0, r_end)``."""
        v = self.fine_values[0] - FIX_POINT
        s = np.sign(v)
        s = s[s != 0]
        return int(np.count_nonzero(s[1:] != s[:-1]))

    @cached_property
    def crossings(self) -> np.ndarray:
        """Radii where ``u`` crosses 1, refined on the dense output."""
        return self._roots_of(0, FIX_POINT)

    def _roots_of(self, comp, level, exclude_end=0.0):
        from scipy.optimize import brentq

        x = self.fine_grid
        y = self.fine_values[comp] - level
        out = []
        for j in range(len(x) - 1):
            if y[j] == 0.0 or y[j] * y[j + 1] >= 0:
                continue
            if x[j] <= 0.0:
                continue
            root = brentq(lambda t: self.evaluate([t])[comp][0] - level, x[j], x[j + 1],
                          xtol=1e-14, rtol=1e-15)
            if self.r_end - root > exclude_end:
                out.append(root)
        return np.array(out)

    @cached_property
    def crit_points(self) -> list:
        """Local extrema ``(r, u)`` including both endpoints.

        Interior turning points closer than ``1e-6 R`` to the boundary are
        treated as the boundary extremum itself.
        """
        pts = [(0.0, float(self.gamma))]
        if self.is_constant:
            return pts + [(self.r_end, float(self.gamma))]
        for rc in self._roots_of(1, 0.0, exclude_end=1e-6 * self.r_end):
            pts.append((float(rc), float(self.evaluate([rc])[0][0])))
        pts.append((self.r_end, float(self.u[-1])))
        return pts

    @cached_property
    def hamiltonian_trace(self) -> np.ndarray:
        u, du = self.fine_values
        return hamiltonian(self.problem, u, du)

    @cached_property
    def energy(self) -> float:
        return energy(self, self.problem)

    def integrate(self, fn) -> float:
        """``|S^{N-1}| int_0^{r_end} fn(r, u, du) r**(N-1) dr`` by Gauss-Legendre."""
        # r[1] is the end of the Taylor piece, so panels never straddle it
        edges = np.linspace(0.0, self.r_end, 33) if self.is_constant else self.r
        h = np.diff(edges)
        pts = (edges[:-1, None] + h[:, None] * _GL_X).ravel()
        w = (h[:, None] * _GL_W).ravel()
        u, du = self.evaluate(pts)
        N = self.problem.N
        vals = fn(pts, u, du) * pts ** (N - 1)
        return float(sphere_area(N) * np.dot(w, vals))

    def max_u(self):
        return max(u for _, u in self.crit_points)

    def min_u(self):
        return min(u for _, u in self.crit_points)

    def to_metadata(self):
        meta = {
            "problem": self.problem.to_dict(),
            "gamma": self.gamma,
            "r_end": self.r_end,
            "zero_count": self.zero_count,
            "energy": self.energy,
            "min_u": self.min_u(),
            "max_u": self.max_u(),
            "du_end": float(self.du[-1]),
        }
        return meta


def hamiltonian(problem: ProblemSpec, u, du):
    """``eps u'**2 / 2 + F(u) - u**2 / 2``, non-increasing along solutions."""
    u = np.asarray(u, dtype=float)
    du = np.asarray(du, dtype=float)
    return problem.eps * 0.5 * du**2 + problem.nonlin.F(u) - 0.5 * u**2


def integrate_ivp(problem: ProblemSpec, gamma: float, r_end: float | None = None,
                  tol: float = 1e-10, ceiling: float = 1e6, stop_on_turn: bool = False,
                  max_steps: int = 2_000_000) -> RadialProfile:
    """Integrate the radial equation from the regular centre with ``u(0) = gamma``.

    Parameters
    ----------
    problem : ProblemSpec
    gamma : float
        Value at the centre, positive.
    r_end : float, optional
        End radius, defaults to ``problem.R``.
    tol : float
        Relative tolerance of the embedded error estimate; the absolute
        tolerance is scaled by ``min(1, |gamma - 1|)``.
    ceiling : float
        Blow-up threshold on ``|u|``.
    stop_on_turn : bool
        Stop at the first zero of ``u'`` after the centre.

    Raises
    ------
    BlowUpError, StepFailureError
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-13, 1e-6]")
    R_end = float(problem.R if r_end is None else r_end)
    if gamma == FIX_POINT and not stop_on_turn:
        r = np.array([0.0, R_end])
        return RadialProfile(problem, float(gamma), r, np.full(2, gamma), np.zeros(2), tol=tol)
    A, B, r0, ls = _taylor_start(problem, gamma)
    # small central values are carried unshifted to keep their relative precision
    shift = FIX_POINT if gamma >= 0.5 * FIX_POINT else 0.0
    v0 = gamma - shift + A * r0**2 + B * r0**4
    w0 = 2 * A * r0 + 4 * B * r0**3
    scale = max(min(1.0, abs(gamma - FIX_POINT), gamma), 1e-300)
    atol = tol * scale
    status, n, rs, ys, dense = _dopri.integrate(
        float(problem.N), float(problem.eps), problem.nonlin.coef_array, problem.nonlin.expo_array,
        shift, r0, v0, w0, R_end, tol, atol, atol,
        float(ceiling), bool(stop_on_turn), min(1e-2, 1e-2 * ls), int(max_steps))
    if status == _dopri.STATUS_BLOWUP:
        raise BlowUpError(f"|u| exceeded {ceiling:g} at r = {rs[-1]:.6g}", float(rs[-1]),
                          float(np.sign(ys[-1, 0])))
    if status in (_dopri.STATUS_UNDERFLOW, _dopri.STATUS_MAXSTEPS):
        raise StepFailureError(f"integration failed at r = {rs[-1]:.6g} (status {status})")
    r = np.concatenate([[0.0], rs])
    u = np.concatenate([[gamma], ys[:, 0] + shift])
    du = np.concatenate([[0.0], ys[:, 1]])
    return RadialProfile(problem, float(gamma), r, u, du, (A, B, r0), dense, tol, shift)


def energy(profile: RadialProfile, problem: ProblemSpec | None = None) -> float:
    """Action ``int eps |grad u|**2 / 2 + u**2 / 2 - F(u)`` over the ball."""
    problem = problem or profile.problem
    eps = problem.eps
    F = problem.nonlin.F
    return profile.integrate(lambda r, u, du: 0.5 * (eps * du**2 + u**2) - F(u))


def constant_energy(problem: ProblemSpec) -> float:
    """Energy of ``u = 1``."""
    N, R = problem.N, problem.R
    vol = sphere_area(N) * R**N / N
    return float((0.5 - problem.nonlin.F(1.0)) * vol)


@dataclass
class IdentityReport:
    mass_residual: float
    nehari_residual: float
    energy_residual: float | None
    sup_bound_ok: bool | None
    slope_bound_ok: bool | None
    du_end: float
    tol: float = 1e-5

    @property
    def ok(self) -> bool:
        res = [self.mass_residual, self.nehari_residual]
        if self.energy_residual is not None:
            res.append(self.energy_residual)
        flags = [b for b in (self.sup_bound_ok, self.slope_bound_ok) if b is not None]
        return all(abs(x) <= self.tol for x in res) and all(flags)

    def to_dict(self):
        d = dict(self.__dict__)
        d["ok"] = self.ok
        return d


def verify_solution_identities(profile: RadialProfile, problem: ProblemSpec | None = None,
                               tol: float = 1e-5) -> IdentityReport:
    """Integral identities satisfied by Neumann solutions.

    * mass: ``int u = int f(u)``
    * Nehari: ``eps int |grad u|**2 + int u**2 = int f(u) u``
    * for the pure power, ``E = (1/2 - 1/p) ||u||_{H^1}**2``
    * for ``u(0) < 1`` and the pure power, ``max u <= (p/2)**(1/(p-2))`` and
      ``max |u'| <= sqrt((p-2)/p)``.

    Residuals are relative; violations are reported as flags.
    """
    problem = problem or profile.problem
    f = problem.nonlin.f
    eps = problem.eps
    int_u = profile.integrate(lambda r, u, du: u)
    int_f = profile.integrate(lambda r, u, du: f(u))
    h1 = profile.integrate(lambda r, u, du: eps * du**2 + u**2)
    int_fu = profile.integrate(lambda r, u, du: f(u) * u)
    # sign-changing solutions make int u small, so scale by the absolute masses
    mass_scale = profile.integrate(lambda r, u, du: np.abs(u) + np.abs(f(u)))
    mass = (int_u - int_f) / max(mass_scale, 1e-300)
    nehari = (h1 - int_fu) / max(abs(h1), 1e-300)
    e_res = sup_ok = slope_ok = None
    if problem.is_power:
        p = problem.nonlin.p
        E = profile.energy
        e_res = (E - (0.5 - 1.0 / p) * h1) / max(abs(E), 1e-300)
        if profile.gamma < FIX_POINT:
            _, du = profile.fine_values
            sup_ok = profile.max_u() <= (p / 2.0) ** (1.0 / (p - 2.0)) + 1e-9
            slope_ok = float(np.max(np.abs(du))) <= math.sqrt((p - 2.0) / p) + 1e-9
    return IdentityReport(float(mass), float(nehari), None if e_res is None else float(e_res),
                          sup_ok, slope_ok, float(profile.du[-1]), tol)


def write_profile(profile: RadialProfile, path, include_du: bool = True, n_points: int | None = None):
    """Write ``r u [u']`` columns plus a JSON sidecar ``<path>.json``."""
    if n_points:
        r = np.linspace(0.0, profile.r_end, n_points)
        u, du = profile.evaluate(r)
    else:
        r, u, du = profile.r, profile.u, profile.du
    cols = [r, u, du] if include_du else [r, u]
    names = ["r", "u", "du"] if include_du else ["r", "u"]
    atomic_write_text(path, format_columns(names, cols))
    atomic_write_json(str(path) + ".json", profile.to_metadata())
