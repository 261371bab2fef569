import math

import numpy as np
import pytest
from scipy import integrate, special

from neumann_radial.analysis import (
    COEFF_HEADER,
    c_from_alpha_beta,
    coeff_a,
    coeff_b_eps,
    coeff_b_radial,
    coeff_c_1d,
    coeff_c_nonradial_first,
    critical_radius,
    j_cubed_tail,
    lemma_integral_scan,
    morse_index_constant,
    morse_index_radial,
    nonradial_alpha_beta,
    sphere_moment_2,
    sphere_moment_4,
    write_coefficient_table,
)
from neumann_radial.radial_ode import ProblemSpec, parse_nonlinearity
from neumann_radial.shooting import SolutionType, find_solutions
from neumann_radial.specfun import sphere_area
from neumann_radial.spectrum import radial_eigenvalue, spectrum_list


def scipy_cubic_integral(N, R, i):
    """Independent value of the integral of phi_i**3 over B_R from scipy's Bessel J."""
    nu = (N - 2) / 2
    lam = radial_eigenvalue(N, R, i)
    a = math.sqrt(lam)

    def g(r):
        return r ** (-nu) * special.jv(nu, a * r) if r > 0 else (0.5 * a) ** nu / math.gamma(nu + 1)

    S = sphere_area(N)
    norm2 = S * integrate.quad(lambda r: g(r) ** 2 * r ** (N - 1), 0, R, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    c = 1 / math.sqrt(norm2)
    cube = integrate.quad(lambda r: g(r) ** 3 * r ** (N - 1), 0, R, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    return S * c**3 * cube


def test_coeff_a():
    assert coeff_a("radial-p", 3, 4.0, 2) == -1.0
    assert coeff_a("one-dim") == -1.0
    assert coeff_a("radial-eps", 3, 4.0, 2) == pytest.approx(1.26192, abs=1e-5)
    with pytest.raises(ValueError):
        coeff_a("bogus")


def test_b_radial_against_scipy():
    for N, R, i in [(3, 4.0, 2), (4, 1.0, 3), (5, 4.0, 4)]:
        rec = coeff_b_radial(N, R, i)
        lam = radial_eigenvalue(N, R, i)
        ref = -0.5 * (1 + lam) * lam * scipy_cubic_integral(N, R, i)
        assert rec.b == pytest.approx(ref, rel=1e-8)


def test_b_radial_signs_and_dual_path():
    for N in (3, 4, 5, 6, 7):
        for i in (2, 3, 4, 5, 6):
            for R in (1.0, 4.0, 9.0):
                rec = coeff_b_radial(N, R, i)
                assert rec.b < 0
                assert rec.quadratures["path_rel_diff"] <= 1e-6


def test_b_radial_two_dimensions_large_index():
    for i in range(10, 15):
        assert coeff_b_radial(2, 4.0, i).b < 0


def test_b_eps():
    # f(u) = 1.5 u**2 - 0.5 u**3 has f''(1) = 0
    flat = parse_nonlinearity("sumpow:1.5,2;-0.5,3")
    assert coeff_b_eps(3, 4.0, flat, 2).b == pytest.approx(0.0, abs=1e-14)
    quad = parse_nonlinearity("quadratic")
    rec = coeff_b_eps(3, 4.0, quad, 2)
    lam = radial_eigenvalue(3, 4.0, 2)
    assert rec.b == pytest.approx(scipy_cubic_integral(3, 4.0, 2) / lam, rel=1e-8)
    assert rec.b > 0
    neg = parse_nonlinearity("sumpow:1.8,2;-0.8,3")  # f''(1) = -1.2
    for N in (3, 4, 5):
        for i in (2, 3, 4):
            assert np.sign(coeff_b_eps(N, 4.0, neg, i).b) == -1
            assert np.sign(coeff_b_eps(N, 4.0, quad, i).b) == 1


def test_c_1d_examples():
    assert coeff_c_1d(math.pi, 2) == pytest.approx(0.26526, abs=1e-5)
    for R in np.linspace(0.5, 10, 12):
        for i in range(1, 8):
            assert coeff_c_1d(R, i) > 0
    ratio = coeff_c_1d(2000.0, 3) / coeff_c_1d(1000.0, 3)
    assert ratio == pytest.approx(1 / 8, rel=1e-4)
    with pytest.raises(ValueError):
        coeff_c_1d(-1.0, 2)


def test_c_1d_against_quadrature_route():
    # c = (1+lam) lam (-(lam-1) int phi^4 - 3 (1+lam) lam int phi^2 w) / 6 with w from the Neumann problem
    for R in (0.7, 2.0, 5.0):
        for i in (1, 2, 4):
            lam = (i * math.pi / (2 * R)) ** 2
            k = i * math.pi / (2 * R)
            phi = lambda x: math.cos(k * (x + R)) / math.sqrt(R)
            w = lambda x: -1 / (2 * R * lam) + math.cos(2 * k * (x + R)) / (2 * R * (4 * k * k - lam))
            i4 = integrate.quad(lambda x: phi(x) ** 4, -R, R, limit=200, epsabs=1e-14)[0]
            i2w = integrate.quad(lambda x: phi(x) ** 2 * w(x), -R, R, limit=200, epsabs=1e-14)[0]
            c = (1 + lam) * lam * (-(lam - 1) * i4 - 3 * (1 + lam) * lam * i2w) / 6
            assert coeff_c_1d(R, i) == pytest.approx(c, rel=1e-10)


def test_c_1d_matches_interval_pipeline():
    for R in (0.5, 1.0, 3.0):
        assert coeff_c_nonradial_first(1, R).c == pytest.approx(coeff_c_1d(R, 1), rel=1e-11)


def test_sphere_moments_monte_carlo():
    rng = np.random.default_rng(11)
    for N in (2, 3, 5, 7):
        x = rng.standard_normal((400_000, N))
        t = x[:, 0] ** 2 / np.sum(x**2, axis=1)
        S = sphere_area(N)
        assert sphere_moment_2(N) == pytest.approx(S * t.mean(), rel=1e-2)
        assert sphere_moment_4(N) == pytest.approx(S * (t**2).mean(), rel=1e-2)


def test_c_nonradial_algebra():
    for N in (2, 3, 5):
        d = nonradial_alpha_beta(N)
        assert d["lambda_bar"] == pytest.approx(spectrum_list(N, 1.0, 2)[1].lam, rel=1e-12)
        for R in (0.5, 2.0):
            rec = coeff_c_nonradial_first(N, R)
            assert rec.c == pytest.approx(c_from_alpha_beta(d["lambda_bar"], d["alpha"], d["beta"], N, R), rel=1e-12)
            assert rec.quadratures["scaled_c"] == pytest.approx(rec.c * R ** (N + 2), rel=1e-12)


def test_c_nonradial_alpha_quadrature():
    # alpha = int phi^4 with phi = g(r) x1/r normalised, checked by scipy quadrature
    N = 3
    d = nonradial_alpha_beta(N)
    z = d["z"]
    nu = N / 2
    g = lambda r: r ** (1 - nu) * special.jv(nu, z * r)
    i2 = integrate.quad(lambda r: g(r) ** 2 * r ** (N - 1), 0, 1, epsabs=1e-14)[0]
    i4 = integrate.quad(lambda r: g(r) ** 4 * r ** (N - 1), 0, 1, epsabs=1e-14)[0]
    c2 = 1 / (sphere_moment_2(N) * i2)
    assert d["alpha"] == pytest.approx(c2**2 * sphere_moment_4(N) * i4, rel=1e-9)


def test_critical_radius_positive_c():
    for N in range(3, 8):
        R = critical_radius(N)
        assert 2 + spectrum_list(N, R, 2)[1].lam == pytest.approx(2 * N / (N - 2), rel=1e-12)
        assert coeff_c_nonradial_first(N, R).c > 0
    with pytest.raises(ValueError):
        critical_radius(2)


def test_lemma_positive():
    for N in range(3, 8):
        nu = N / 2 - 1
        assert lemma_integral_scan(nu, 1 - nu, 3, 40).min_value > 0
    assert lemma_integral_scan(0, 1, 3, 36).min_value > 0


def test_lemma_root_values_alternate():
    s = lemma_integral_scan(0.5, 0.5, 3, 60)
    d = s.root_values - j_cubed_tail(0.5)
    assert np.all(np.sign(d[1:]) == -np.sign(d[:-1]))
    assert np.all(np.abs(d[1:]) < np.abs(d[:-1]))


def test_lemma_first_panel_against_scipy():
    nu, alpha, beta = 1.5, -0.5, 3
    s = lemma_integral_scan(nu, alpha, beta, 20)
    ref = integrate.quad(lambda x: x**alpha * special.jv(nu, x) ** 3, 0, 20, limit=400, epsabs=1e-13)[0]
    assert s.final_value == pytest.approx(ref, abs=1e-10)


def test_tail_closed_forms():
    assert j_cubed_tail(0.5) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-14)
    assert j_cubed_tail(0.0) == pytest.approx(2 / (math.sqrt(3) * math.pi), rel=1e-14)
    s = lemma_integral_scan(1.0, 0.0, 3, 200)
    assert s.tail_estimate == pytest.approx(j_cubed_tail(1.0), rel=1e-2)


def test_morse_constant():
    for N, R in [(3, 2.0), (4, 4.0)]:
        lam2 = spectrum_list(N, R, 2)[1].lam
        assert morse_index_constant(N, R, 2 + 0.5 * lam2).index == 1
    assert morse_index_constant(4, 4.0, 4.0, radial_only=True).index == 2
    assert morse_index_constant(3, 2.0, 3.2).index == 4


def test_morse_constant_jumps_by_one():
    N, R = 3, 4.0
    thresholds = [2 + radial_eigenvalue(N, R, i) for i in range(2, 6)]
    ps = np.linspace(2.01, thresholds[-1] + 0.2, 300)
    idx = [morse_index_constant(N, R, p, radial_only=True).index for p in ps]
    assert all(b - a in (0, 1) for a, b in zip(idx, idx[1:]))
    for k, t in enumerate(thresholds, start=1):
        assert morse_index_constant(N, R, t - 1e-6, True).index == k
        assert morse_index_constant(N, R, t + 1e-6, True).index == k + 1


def test_morse_radial_lower_branch():
    sol = find_solutions(ProblemSpec.power(4, 4.0, 4.0), want=SolutionType(2, "-"))[0]
    res = morse_index_radial(sol)
    assert res.index == 1 and res.stable and not res.degenerate
    # count on a 2x coarser mesh agrees
    coarse = morse_index_radial(sol, meshes=(1001, 2001))
    assert coarse.index == res.index


def test_morse_radial_constant_matches_spectrum():
    from neumann_radial.radial_ode import integrate_ivp
    prob = ProblemSpec.power(3, 4.0, 4.5)
    prof = integrate_ivp(prob, 1.0)
    assert morse_index_radial(prof).index == morse_index_constant(3, 4.0, 4.5, radial_only=True).index


def test_coefficient_table(tmp_path):
    rows = [coeff_b_radial(3, 4.0, i) for i in (2, 3)]
    path = tmp_path / "coef.dat"
    write_coefficient_table(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == COEFF_HEADER
    assert lines[1].split()[:4] == ["radial-p", "3", "4", "2"]
