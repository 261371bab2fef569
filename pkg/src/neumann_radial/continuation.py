"""Continuation of radial solution branches from the constant state.

Branches are followed in the plane ``(x, y)`` with ``y = ln u(0)`` and
``x = p`` for the power family or ``x = ln eps`` for the eps family.  Each
step is a secant predictor followed by a scalar corrector along the line
orthogonal to the secant, which is the pseudo-arclength system reduced to
one unknown.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .analysis import morse_index_radial
from .io_utils import atomic_write_text, format_columns
from .radial_ode import FIX_POINT, NonlinearityDescriptor, ProblemSpec, RadialProfile, StepFailureError
from .shooting import (
    DEFAULT_TOL,
    SolutionType,
    StructureError,
    _profile_ok,
    classify,
    residual_derivative,
    shoot_residual,
)
from .spectrum import radial_eigenvalue


class SeedFailureError(RuntimeError):
    pass


def bifurcation_points_p(N: int, R: float, count: int) -> list:
    """``2 + lambda_i`` for the radial eigenvalues ``i = 2 .. count + 1``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return [2.0 + radial_eigenvalue(N, R, i) for i in range(2, count + 2)]


def bifurcation_points_eps(N: int, R: float, f: NonlinearityDescriptor, count: int) -> list:
    """``eps_i = (f'(1) - 1) / lambda_i`` for ``i = 2 .. count + 1`` (descending)."""
    slope = float(f.fprime(1.0))
    if not slope > 1:
        raise ValueError(f"need f'(1) > 1, got {slope}")
    return [(slope - 1.0) / radial_eigenvalue(N, R, i) for i in range(2, count + 2)]


@dataclass
class StepControl:
    ds_init: float = 1e-3
    ds_max: float = 0.05
    ds_min: float = 1e-9
    grow: float = 1.3
    easy_after: int = 4
    max_failures: int = 10
    max_points: int = 4000
    seed_offset: float = 1e-3
    gamma_max: float = 1e3
    gamma_min: float = 1e-10
    tol: float = DEFAULT_TOL
    corrector_iters: int = 14
    min_cos: float = 0.9
    morse: bool = True
    keep_profiles: bool = False


@dataclass
class BranchPoint:
    param: float
    gamma: float
    energy: float
    max_u: float
    min_u: float
    zero_count: int
    morse_index_rad: int | None = None
    morse_degenerate: bool = False
    profile_ref: RadialProfile | None = field(default=None, repr=False)


@dataclass
class Branch:
    family: str
    N: int
    R: float
    nonlin: NonlinearityDescriptor
    i: int
    sign: str
    param_star: float
    points: list = field(default_factory=list)
    folds: list = field(default_factory=list)
    termination: str = ""
    wall_time: float = 0.0

    @property
    def identity(self) -> SolutionType:
        return SolutionType(self.i, self.sign)

    def params(self):
        return np.array([pt.param for pt in self.points])

    def gammas(self):
        return np.array([pt.gamma for pt in self.points])

    def problem_at(self, param: float) -> ProblemSpec:
        return _problem(self.family, self.N, self.R, self.nonlin, param)

    def to_manifest(self):
        return {
            "family": self.family, "N": self.N, "R": self.R, "nonlinearity": self.nonlin.to_dict(),
            "type": str(self.identity), "param_star": self.param_star,
            "n_points": len(self.points), "termination": self.termination,
            "folds": [{"param": p, "gamma": g} for p, g in self.folds],
        }


def _problem(family, N, R, nonlin, param):
    if family == "p":
        return ProblemSpec.power(N, R, param)
    return ProblemSpec(N, float(R), nonlin.with_eps(param))


def _to_x(family, param):
    return param if family == "p" else math.log(param)


def _to_param(family, x):
    return x if family == "p" else math.exp(x)


class _Residual:
    def __init__(self, family, N, R, nonlin, tol):
        self.family, self.N, self.R, self.nonlin, self.tol = family, N, R, nonlin, tol

    def problem(self, x):
        return _problem(self.family, self.N, self.R, self.nonlin, _to_param(self.family, x))

    def __call__(self, x, y):
        return shoot_residual(self.problem(x), math.exp(y), self.tol)


def _seed_param(G, x_star, y, family, span=0.6, n=60):
    """Parameter nearest to the bifurcation value with ``G(x, y) = 0``."""
    g0 = G(x_star, y)
    if g0 == 0.0:
        return x_star
    offsets = np.geomspace(1e-7, span, n)
    prev = {+1: (x_star, g0), -1: (x_star, g0)}
    for d in offsets:
        for side in (+1, -1):
            x = x_star + side * d
            if family == "p" and x <= 2.0:
                continue
            gx = G(x, y)
            xp, gp = prev[side]
            if gx * gp < 0:
                return brentq(lambda t: G(t, y), min(xp, x), max(xp, x), xtol=1e-14, rtol=1e-15)
            prev[side] = (x, gx)
    raise SeedFailureError(f"no branch crossing within {span} of the bifurcation value")


def _make_point(problem, prof, step, keep):
    mi = None
    deg = False
    if step.morse:
        res = morse_index_radial(prof)
        mi, deg = res.index, res.degenerate
    return BranchPoint(problem.param, prof.gamma, prof.energy, prof.max_u(), prof.min_u(),
                       prof.zero_count, mi, deg, prof if keep else None)


def _accept(G, x, y, want, step):
    """Profile at ``(x, y)`` if it is a converged solution of the wanted type."""
    problem = G.problem(x)
    from .radial_ode import integrate_ivp

    prof = integrate_ivp(problem, math.exp(y), tol=step.tol)
    if not _profile_ok(prof):
        return None, problem
    try:
        if classify(prof) != want:
            return None, problem
    except StructureError:
        return None, problem
    return prof, problem


def _corrector(G, Xp, nrm, ds, iters):
    """Solve ``G(Xp + t nrm) = 0`` for the scalar ``t`` by a safeguarded secant."""
    f = lambda t: G(Xp[0] + t * nrm[0], Xp[1] + t * nrm[1])
    t0, f0 = 0.0, f(0.0)
    t1 = 1e-3 * ds
    f1 = f(t1)
    for _ in range(iters):
        if f1 == f0:
            break
        t2 = t1 - f1 * (t1 - t0) / (f1 - f0)
        if abs(t2) > ds:
            return None
        t0, f0 = t1, f1
        t1, f1 = t2, f(t2)
        if abs(t1 - t0) <= 1e-13 * (1.0 + abs(t1)) or f1 == 0.0:
            return t1
    # fall back to bracketing when the secant stalls near the solution
    if abs(t1) <= ds:
        for w in (1e-9, 1e-7, 1e-5):
            a, b = t1 - w * ds, t1 + w * ds
            fa, fb = f(a), f(b)
            if fa * fb < 0:
                return brentq(f, a, b, xtol=1e-15, rtol=1e-15)
    return None


def trace_branch(family: str, N: int, R: float, i: int, sign: str, param_range,
                 nonlin: NonlinearityDescriptor | None = None,
                 step: StepControl | None = None) -> Branch:
    """Follow the radial branch of type ``i`` with ``sign(u(0) - 1) = sign``.

    Parameters
    ----------
    family : {"p", "eps"}
        ``p``: pure power with exponent as parameter; ``eps``: diffusion
        parameter with nonlinearity ``nonlin``.
    param_range : (float, float)
        Tracing stops once the parameter leaves this interval.
    """
    step = step or StepControl()
    t_start = time.perf_counter()
    if family == "p":
        nonlin = NonlinearityDescriptor.pure_power(3.0)
        p_star = 2.0 + radial_eigenvalue(N, R, i)
    elif family == "eps":
        if nonlin is None or nonlin.kind == "power":
            raise ValueError("eps family needs a general nonlinearity")
        p_star = bifurcation_points_eps(N, R, nonlin, i - 1)[-1]
    else:
        raise ValueError("family must be 'p' or 'eps'")
    want = SolutionType(i, sign)
    lo, hi = sorted(param_range)
    if not lo < p_star < hi:
        raise SeedFailureError(f"bifurcation value {p_star:.8g} outside the range [{lo:g}, {hi:g}]")
    branch = Branch(family, N, R, nonlin, i, sign, p_star)
    G = _Residual(family, N, R, nonlin, step.tol)
    x_star = _to_x(family, p_star)
    sgn = 1.0 if sign == "+" else -1.0

    seeds = []
    for mult in (1.0, 2.0):
        y = math.log(FIX_POINT + sgn * mult * step.seed_offset)
        x = _seed_param(G, x_star, y, family)
        prof, problem = _accept(G, x, y, want, step)
        if prof is None:
            raise SeedFailureError(f"seed at param {_to_param(family, x):.8g} (bifurcation "
                                   f"value {p_star:.8g}) is not of type {want}")
        seeds.append((np.array([x, y]), prof, problem))
    for X, prof, problem in seeds:
        branch.points.append(_make_point(problem, prof, step, step.keep_profiles))

    X_prev, X_cur = seeds[0][0], seeds[1][0]
    ds = step.ds_init
    easy = 0
    failures = 0
    termination = "point_limit"
    while len(branch.points) < step.max_points:
        sec = X_cur - X_prev
        tau = sec / np.linalg.norm(sec)
        nrm = np.array([-tau[1], tau[0]])
        Xp = X_cur + ds * tau
        t = _corrector(G, Xp, nrm, ds, step.corrector_iters)
        ok = False
        if t is not None:
            X_new = Xp + t * nrm
            new_dir = (X_new - X_cur) / np.linalg.norm(X_new - X_cur)
            if float(np.dot(new_dir, tau)) >= step.min_cos:
                gamma_new = math.exp(X_new[1])
                if gamma_new > step.gamma_max or gamma_new < step.gamma_min:
                    termination = "blow_up"
                    break
                if (gamma_new - FIX_POINT) * sgn <= 0:
                    prof = None
                else:
                    try:
                        prof, problem = _accept(G, X_new[0], X_new[1], want, step)
                    except StepFailureError:
                        prof = None
                ok = prof is not None
        if not ok:
            failures += 1
            ds *= 0.5
            easy = 0
            if failures >= step.max_failures or ds < step.ds_min:
                termination = "step_failure"
                break
            continue
        failures = 0
        param_new = _to_param(family, X_new[0])
        if not lo <= param_new <= hi:
            termination = "param_limit"
            break
        branch.points.append(_make_point(problem, prof, step, step.keep_profiles))
        X_prev, X_cur = X_cur, X_new
        easy += 1
        if easy >= step.easy_after:
            ds = min(step.ds_max, ds * step.grow)
            easy = 0
    branch.termination = termination
    branch.folds = _detect_folds(branch, G, step)
    branch.wall_time = time.perf_counter() - t_start
    return branch


def _detect_folds(branch, G, step):
    xs = np.array([_to_x(branch.family, p.param) for p in branch.points])
    ys = np.log(branch.gammas())
    folds = []
    dx = np.diff(xs)
    for k in range(1, len(dx)):
        if dx[k - 1] * dx[k] < 0:
            folds.append(_refine_fold(branch, G, xs, ys, k, dx[k - 1] > 0))
    return folds


def _refine_fold(branch, G, xs, ys, k, is_max):
    """Extremum of the parameter along the branch between points ``k-1`` and ``k+1``."""
    width = 4.0 * max(abs(xs[k + 1] - xs[k]), abs(xs[k] - xs[k - 1])) + 1e-6
    def x_of_y(y):
        # on the branch near the fold x is single-valued in y
        a, b = xs[k] - width, xs[k] + width
        grid = np.linspace(a, b, 9)
        vals = [G(x, y) for x in grid]
        best = None
        for j in range(len(grid) - 1):
            if vals[j] * vals[j + 1] < 0:
                root = brentq(lambda x: G(x, y), grid[j], grid[j + 1], xtol=1e-14, rtol=1e-15)
                if best is None or abs(root - xs[k]) < abs(best - xs[k]):
                    best = root
        if best is None:
            return xs[k]
        return best

    ylo, yhi = sorted((ys[k - 1], ys[k + 1]))
    res = minimize_scalar(lambda y: -x_of_y(y) if is_max else x_of_y(y), bounds=(ylo, yhi),
                          method="bounded", options={"xatol": 1e-10})
    y_f = float(res.x)
    x_f = x_of_y(y_f)
    return (_to_param(branch.family, x_f), math.exp(y_f))


@dataclass
class FoldRecord:
    param: float
    gamma: float
    profile: RadialProfile | None
    dres_dgamma: float
    scale: float
    param_star: float

    @property
    def degeneracy_ratio(self) -> float:
        return abs(self.dres_dgamma) / self.scale if self.scale > 0 else float("inf")

    @property
    def offset_from_bifurcation(self) -> float:
        """``param* - param_fold``, compared elsewhere with multiplicity thresholds."""
        return self.param_star - self.param

    def to_dict(self):
        return {"param": self.param, "gamma": self.gamma, "dres_dgamma": self.dres_dgamma,
                "scale": self.scale, "degeneracy_ratio": self.degeneracy_ratio,
                "param_star": self.param_star, "offset_from_bifurcation": self.offset_from_bifurcation}


def fold_report(branch: Branch, tol: float = DEFAULT_TOL) -> list:
    """Degenerate solutions at the detected folds.

    ``scale`` is the largest ``|d residual / d gamma|`` over the branch points,
    so ``degeneracy_ratio`` near zero evidences a kernel of the linearisation.
    """
    from .radial_ode import integrate_ivp

    if not branch.folds:
        return []
    sample = branch.points[:: max(1, len(branch.points) // 40)]
    scale = max(abs(residual_derivative(branch.problem_at(pt.param), pt.gamma, tol)) for pt in sample)
    out = []
    for param, gamma in branch.folds:
        problem = branch.problem_at(param)
        d = residual_derivative(problem, gamma, tol)
        try:
            prof = integrate_ivp(problem, gamma, tol=tol)
        except RuntimeError:
            prof = None
        out.append(FoldRecord(param, gamma, prof, d, scale, branch.param_star))
    return out


@dataclass
class LayerDiagnostics:
    eps: float
    interior_maxima: list
    boundary_gap: float | None
    inter_gaps: list
    ratio_eps_log: list
    ratio_sqrt_eps_log: list

    def to_dict(self):
        return dict(self.__dict__)


def layer_diagnostics(profile: RadialProfile, eps: float | None = None) -> LayerDiagnostics:
    """Positions of interior local maxima and their gaps, scaled two ways.

    With diffusion ``eps`` in front of the Laplacian the natural length is
    ``sqrt(eps)``; both ``gap / (eps ln(1/eps))`` and
    ``gap / (sqrt(eps) ln(1/sqrt(eps)))`` are reported.
    """
    eps = profile.problem.eps if eps is None else eps
    R = profile.r_end
    crit = profile.crit_points
    maxima = []
    for j in range(1, len(crit) - 1):
        r, u = crit[j]
        if u > crit[j - 1][1] and u > crit[j + 1][1]:
            maxima.append(r)
    maxima = sorted(maxima, reverse=True)
    if not maxima:
        return LayerDiagnostics(eps, [], None, [], [], [])
    gaps = [R - maxima[0]] + [a - b for a, b in zip(maxima[:-1], maxima[1:])]
    s1 = eps * math.log(1.0 / eps)
    se = math.sqrt(eps)
    s2 = se * math.log(1.0 / se)
    return LayerDiagnostics(eps, maxima, (R - maxima[0]) / R, gaps[1:],
                            [g / s1 for g in gaps], [g / s2 for g in gaps])


BRANCH_COLUMNS = ["param", "gamma", "energy", "zero_count", "morse_index_rad", "min_u", "max_u"]


def write_branch(branch: Branch, path, extended: bool = True):
    pts = branch.points
    cols = [[p.param for p in pts], [p.gamma for p in pts]]
    names = BRANCH_COLUMNS[:2]
    if extended:
        cols += [[p.energy for p in pts], [p.zero_count for p in pts],
                 [-1 if p.morse_index_rad is None else p.morse_index_rad for p in pts],
                 [p.min_u for p in pts], [p.max_u for p in pts]]
        names = BRANCH_COLUMNS
    atomic_write_text(path, format_columns(names, cols))
