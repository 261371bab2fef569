import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from neumann_radial.radial_ode import ProblemSpec, integrate_ivp, parse_nonlinearity
from neumann_radial.shooting import time_map
from neumann_radial.specfun import bessel_j_root, sphere_area
from neumann_radial.spectrum import radial_eigenfunction

PROPS = settings(derandomize=True, deadline=None, database=None)

dims = st.integers(min_value=2, max_value=6)
exponents = st.floats(min_value=2.05, max_value=6.0)
gammas = st.floats(min_value=0.01, max_value=5.0).filter(lambda g: abs(g - 1) > 1e-6)
radii = st.floats(min_value=0.5, max_value=12.0)


def hamiltonian_non_increasing(prof):
    h = prof.hamiltonian_trace
    return bool(np.all(h[1:] <= h[:-1] + 1e-9 * (1 + np.abs(h[:-1]))))


@settings(max_examples=200, derandomize=True, deadline=None, database=None)
@given(N=dims, p=exponents, gamma=gammas, R=radii)
def test_hamiltonian_dissipation_power(N, p, gamma, R):
    prof = integrate_ivp(ProblemSpec.power(N, R, p), gamma)
    assert hamiltonian_non_increasing(prof)


@PROPS
@given(N=dims, name=st.sampled_from(["quadratic", "f1-like", "f2-like"]),
       eps=st.floats(min_value=0.02, max_value=2.0), gamma=st.floats(min_value=0.01, max_value=3.0),
       R=radii)
def test_hamiltonian_dissipation_general(N, name, eps, gamma, R):
    prof = integrate_ivp(ProblemSpec(N, R, parse_nonlinearity(name, eps)), gamma)
    assert hamiltonian_non_increasing(prof)


@PROPS
@given(N=dims, p=exponents, gamma=gammas, R=radii)
def test_crossings_are_simple(N, p, gamma, R):
    prof = integrate_ivp(ProblemSpec.power(N, R, p), gamma)
    scale = float(np.max(np.abs(prof.du)))
    if scale == 0:
        return
    for rc in prof.crossings:
        assert abs(prof.evaluate([rc])[1][0]) > 1e-8 * scale


@settings(max_examples=20, derandomize=True, deadline=None, database=None)
@given(N=dims, p=st.floats(min_value=2.2, max_value=5.0), gamma=st.floats(min_value=0.05, max_value=3.0),
       R=st.floats(min_value=1.0, max_value=5.0), eps=st.floats(min_value=0.05, max_value=2.0))
def test_scaling_equivalence(N, p, gamma, R, eps):
    # diffusion eps on B_R is the unit problem on B_{R / sqrt(eps)} after r -> r / sqrt(eps)
    scaled = integrate_ivp(ProblemSpec(N, R, parse_nonlinearity(f"sumpow:1,{p - 1!r}", eps)), gamma, tol=1e-12)
    plain = integrate_ivp(ProblemSpec.power(N, R / math.sqrt(eps), p), gamma, tol=1e-12)
    r = np.linspace(0.0, R, 41)
    u1, du1 = scaled.evaluate(r)
    u2, du2 = plain.evaluate(r / math.sqrt(eps))
    assert np.max(np.abs(u1 - u2)) <= 1e-7 * max(1.0, np.max(np.abs(u2)))
    assert np.max(np.abs(math.sqrt(eps) * du1 - du2)) <= 1e-7 * max(1.0, np.max(np.abs(u2)))


@settings(max_examples=30, derandomize=True, deadline=None, database=None)
@given(N=st.integers(min_value=2, max_value=4), p=st.floats(min_value=2.5, max_value=5.0),
       g1=st.floats(min_value=0.02, max_value=0.99), g2=st.floats(min_value=0.02, max_value=0.99))
def test_time_map_monotone(N, p, g1, g2):
    if abs(g1 - g2) < 1e-3:
        return
    lo, hi = sorted((g1, g2))
    assert time_map(N, p, lo) > time_map(N, p, hi)


@settings(max_examples=15, derandomize=True, deadline=None, database=None)
@given(N=st.integers(min_value=2, max_value=5), p=st.floats(min_value=2.5, max_value=5.0))
def test_time_map_linear_limit(N, p):
    limit = bessel_j_root(N / 2, 1) / math.sqrt(p - 2)
    assert abs(time_map(N, p, 0.999) - limit) < 1e-2


@settings(max_examples=15, derandomize=True, deadline=None, database=None)
@given(N=st.integers(min_value=2, max_value=6), R=st.floats(min_value=0.5, max_value=10.0),
       i=st.integers(min_value=1, max_value=6), j=st.integers(min_value=1, max_value=6))
def test_eigenfunction_orthonormality(N, R, i, j):
    val = integrate.quad(lambda r: radial_eigenfunction(N, R, i, r) * radial_eigenfunction(N, R, j, r)
                         * r ** (N - 1), 0, R, limit=400, epsabs=1e-14, epsrel=1e-13)[0]
    assert abs(sphere_area(N) * val - (1.0 if i == j else 0.0)) <= 1e-8
