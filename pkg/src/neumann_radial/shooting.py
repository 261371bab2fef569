"""Shooting on the central value ``gamma = u(0)`` for the Neumann condition.

A radial solution is of type ``i`` when ``u - 1`` changes sign ``i - 1``
times on ``(0, R)``; the sign records whether ``u(0)`` lies above or below 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .radial_ode import (
    FIX_POINT,
    BlowUpError,
    ProblemSpec,
    RadialProfile,
    StepFailureError,
    integrate_ivp,
)

DEFAULT_TOL = 1e-11
CEILING = 1e6


class NoSignChangeError(RuntimeError):
    pass


class TypeMismatchError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


class StructureError(RuntimeError):
    """Critical points of a solution violate the expected envelope."""


class HorizonError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolutionType:
    i: int
    sign: str

    def __post_init__(self):
        if self.sign not in "+-" or len(self.sign) != 1:
            raise ValueError("sign must be '+' or '-'")
        if self.i < 2:
            raise ValueError("type index starts at 2")

    def __str__(self):
        return f"{self.i}{self.sign}"

    @classmethod
    def parse(cls, text: str) -> "SolutionType":
        text = text.strip()
        return cls(int(text[:-1]), text[-1])


def shoot_residual(problem: ProblemSpec, gamma: float, tol: float = DEFAULT_TOL) -> float:
    """``u'(R)`` of the trajectory started at ``u(0) = gamma``.

    A trajectory that exceeds the blow-up ceiling is mapped to
    ``+-CEILING`` according to the sign of its last value of ``u - 1``.
    """
    if gamma == FIX_POINT:
        return 0.0
    try:
        prof = integrate_ivp(problem, gamma, tol=tol, ceiling=CEILING)
    except BlowUpError as exc:
        return CEILING * (exc.direction or 1.0)
    return float(prof.du[-1])


def residual_derivative(problem: ProblemSpec, gamma: float, tol: float = DEFAULT_TOL) -> float:
    """Central difference of :func:`shoot_residual` in ``gamma``.

    The residual vanishes identically at ``gamma = 1`` so the one-sided
    quotient is used there.
    """
    h = 1e-6 * max(1.0, abs(gamma))
    if gamma == FIX_POINT:
        return shoot_residual(problem, gamma + h, tol) / h
    return (shoot_residual(problem, gamma + h, tol) - shoot_residual(problem, gamma - h, tol)) / (2 * h)


def _profile_ok(prof: RadialProfile) -> bool:
    du_max = float(np.max(np.abs(prof.du)))
    return abs(prof.du[-1]) <= 1e-9 * max(1.0, du_max)


def solve_solution(problem: ProblemSpec, bracket, want: SolutionType | None = None,
                   tol: float = DEFAULT_TOL, maxiter: int = 200) -> RadialProfile:
    """Converged Neumann solution with ``u(0)`` inside ``bracket``.

    Raises
    ------
    NoSignChangeError
        The residual has equal signs at the bracket ends.
    TypeMismatchError
        The converged solution is not of type ``want``.
    ConvergenceError
        The Neumann residual could not be driven below tolerance.
    """
    lo, hi = sorted(float(b) for b in bracket)
    flo = shoot_residual(problem, lo, tol)
    fhi = shoot_residual(problem, hi, tol)
    if flo == 0.0:
        gamma = lo
    elif fhi == 0.0:
        gamma = hi
    elif flo * fhi > 0:
        raise NoSignChangeError(f"residual has one sign on [{lo}, {hi}]")
    else:
        gamma = brentq(lambda g: shoot_residual(problem, g, tol), lo, hi,
                       xtol=1e-15, rtol=1e-15, maxiter=maxiter)
    prof = integrate_ivp(problem, gamma, tol=tol, ceiling=CEILING)
    if not _profile_ok(prof):
        raise ConvergenceError(f"Neumann residual {prof.du[-1]:.3e} too large at gamma = {gamma!r}")
    if want is not None:
        got = classify(prof)
        if got != want:
            raise TypeMismatchError(f"found type {got}, wanted {want}")
    return prof


def classify(profile: RadialProfile, strict: bool | None = None, slack: float = 1e-7) -> SolutionType:
    """Type of a converged non-constant solution.

    With ``strict`` (default for the pure power) the critical points are
    checked to alternate around 1 with maxima strictly decreasing and minima
    strictly increasing in ``r``.
    """
    if profile.is_constant or abs(profile.gamma - FIX_POINT) < 1e-13:
        raise StructureError("constant solution has no type")
    if strict is None:
        strict = profile.problem.is_power
    i = profile.zero_count + 1
    sign = "+" if profile.gamma > FIX_POINT else "-"
    if i < 2:
        # monotone without crossing cannot satisfy the Neumann condition
        raise StructureError("no crossing of the constant state")
    if strict:
        crit = profile.crit_points
        if len(crit) != i:
            raise StructureError(f"{len(crit)} critical points for type {i}")
        vals = np.array([u for _, u in crit]) - FIX_POINT
        s = np.sign(vals)
        if np.any(s[1:] == s[:-1]) or np.any(s == 0):
            raise StructureError("extrema do not alternate around 1")
        upper = vals[vals > 0]
        lower = vals[vals < 0]
        if np.any(np.diff(upper) > slack) or np.any(np.diff(lower) < -slack):
            raise StructureError("extrema envelope is not contracting toward 1")
    return SolutionType(i, sign)


def time_map(N, p: float, gamma: float, r_max: float = 100.0, tol: float = 1e-12) -> float:
    """First positive radius where ``u'`` vanishes, for ``0 < gamma < 1``."""
    if not 0 < gamma < 1:
        raise ValueError("time map needs 0 < gamma < 1")
    problem = ProblemSpec.power(N, r_max, p)
    prof = integrate_ivp(problem, gamma, r_end=r_max, tol=tol, stop_on_turn=True)
    if prof.du[-1] > 0 or prof.r_end >= r_max:
        raise HorizonError(f"no turning point before r = {r_max}")
    a, b = prof.r[-2], prof.r[-1]
    return brentq(lambda t: prof.evaluate([t])[1][0], a, b, xtol=1e-15, rtol=1e-15)


def gamma_grid(side: str, n: int = 160, lo: float = 1e-6, hi_plus: float = 300.0,
               hi_minus: float = 1 - 1e-6) -> np.ndarray:
    """Central values on one side of 1, log-spaced in ``|gamma - 1|``."""
    if side == "-":
        d = np.geomspace(lo, hi_minus, n)
        return np.sort(FIX_POINT - d)
    if side == "+":
        d = np.geomspace(lo, hi_plus, n)
        return FIX_POINT + d
    raise ValueError("side must be '+' or '-'")


def find_brackets(problem: ProblemSpec, side: str, n: int = 160, tol: float = DEFAULT_TOL,
                  grid=None) -> list:
    """Adjacent grid pairs where the residual changes sign."""
    g = gamma_grid(side, n) if grid is None else np.asarray(grid)
    res = np.array([shoot_residual(problem, x, tol) for x in g])
    out = []
    for j in range(len(g) - 1):
        if res[j] * res[j + 1] < 0 and max(abs(res[j]), abs(res[j + 1])) < CEILING:
            out.append((g[j], g[j + 1]))
    return out


def find_solutions(problem: ProblemSpec, side: str | None = None, want: SolutionType | None = None,
                   n: int = 160, tol: float = DEFAULT_TOL, positive: bool = True) -> list:
    """All solutions detected by a residual sign scan, optionally filtered by type.

    With ``positive`` set, sign-changing solutions are dropped since the
    solution types are defined for positive solutions only.
    """
    sides = [side] if side else ["-", "+"]
    if want is not None:
        sides = [want.sign]
    sols = []
    for s in sides:
        for br in find_brackets(problem, s, n, tol):
            try:
                prof = solve_solution(problem, br, tol=tol)
                typ = classify(prof)
            except (ConvergenceError, StructureError, StepFailureError):
                continue
            if positive and prof.min_u() <= 0:
                continue
            if want is None or typ == want:
                sols.append(prof)
    return sols
