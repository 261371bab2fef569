import json
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from neumann_radial.radial_ode import (
    BlowUpError,
    NonlinearityDescriptor,
    NonlinearityError,
    ProblemSpec,
    constant_energy,
    energy,
    hamiltonian,
    integrate_ivp,
    parse_nonlinearity,
    verify_solution_identities,
    write_profile,
)
from neumann_radial.spectrum import radial_eigenvalue


def scipy_oracle(N, p, gamma, r_eval, eps=1.0):
    """Independent trajectory: scipy DOP853 from a two-term Taylor start."""
    g = (gamma - abs(gamma) ** (p - 2) * gamma) / eps
    r0 = 1e-6
    y0 = [gamma + g * r0**2 / (2 * N), g * r0 / N]

    def rhs(r, y):
        u, du = y
        return [du, (u - abs(u) ** (p - 2) * u) / eps - (N - 1) / r * du]

    sol = solve_ivp(rhs, (r0, r_eval[-1]), y0, method="DOP853", rtol=1e-13, atol=1e-14,
                    t_eval=r_eval, dense_output=False)
    return sol.y


def test_nonlinearity_validation():
    with pytest.raises(NonlinearityError):
        NonlinearityDescriptor.pure_power(2.0)
    with pytest.raises(NonlinearityError):
        NonlinearityDescriptor.general([2.0], [2.0])  # f(1) = 2
    with pytest.raises(NonlinearityError):
        NonlinearityDescriptor.general([1.0], [1.0])  # f'(0) != 0
    with pytest.raises(NonlinearityError):
        parse_nonlinearity("cubic-ish")
    with pytest.raises(NonlinearityError):
        NonlinearityDescriptor.general([1.0], [2.0], eps=0.0)


def test_registry_fixpoint_structure():
    for name in ("quadratic", "f1-like", "f2-like"):
        f = parse_nonlinearity(name, 0.5)
        assert f.f(1.0) == pytest.approx(1.0)
        assert f.fprime(1.0) > 1
        assert f.eps == 0.5
    f1 = parse_nonlinearity("f1-like")
    u = np.linspace(0.05, 0.95, 181)
    # f(u) - u touches zero at 1/2 without changing sign
    g = f1.f(u) - u
    assert np.all(g <= 1e-14)
    assert f1.f(0.5) == pytest.approx(0.5, abs=1e-14)
    f2 = parse_nonlinearity("f2-like")
    g2 = f2.f(u) - u
    assert np.count_nonzero(np.sign(g2[1:]) != np.sign(g2[:-1])) == 2


def test_parse_forms():
    assert parse_nonlinearity("power:3.5").p == pytest.approx(3.5)
    sp = parse_nonlinearity("sumpow:0.5,2;0.5,3")
    assert sp.f(2.0) == pytest.approx(0.5 * 4 + 0.5 * 8)
    assert sp.F(2.0) == pytest.approx(0.5 * 8 / 3 + 0.5 * 16 / 4)
    assert sp.f(-2.0) == pytest.approx(-sp.f(2.0))


def test_derivatives_consistent():
    f = parse_nonlinearity("f2-like")
    u = np.linspace(0.1, 2.0, 20)
    h = 1e-6
    assert np.allclose((f.F(u + h) - f.F(u - h)) / (2 * h), f.f(u), atol=1e-8)
    assert np.allclose((f.f(u + h) - f.f(u - h)) / (2 * h), f.fprime(u), atol=1e-7)
    assert np.allclose((f.fprime(u + h) - f.fprime(u - h)) / (2 * h), f.fsecond(u), atol=1e-6)


def test_constant_profile():
    prof = integrate_ivp(ProblemSpec.power(3, 2.0, 3.0), 1.0)
    assert np.all(prof.u == 1.0) and np.all(prof.du == 0.0)
    rep = verify_solution_identities(prof)
    assert rep.ok
    assert rep.mass_residual == 0.0 and rep.nehari_residual == 0.0


@pytest.mark.parametrize("N,p,gamma", [(2, 3.0, 0.5), (3, 4.0, 1.7), (4, 3.2, 0.02), (3, 2.5, 6.0)])
def test_trajectory_against_scipy(N, p, gamma):
    R = 4.0
    prof = integrate_ivp(ProblemSpec.power(N, R, p), gamma, tol=1e-12)
    r = np.linspace(0.01, R, 60)
    u, du = prof.evaluate(r)
    ref = scipy_oracle(N, p, gamma, r)
    scale = max(1.0, np.max(np.abs(ref[0])))
    assert np.max(np.abs(u - ref[0])) <= 1e-8 * scale
    assert np.max(np.abs(du - ref[1])) <= 1e-8 * scale


def test_regular_centre():
    prof = integrate_ivp(ProblemSpec.power(3, 4.0, 3.0), 0.4)
    assert prof.du[0] == 0.0
    assert prof.u[0] == 0.4


def test_sup_bound_at_level_zero():
    for N, p in [(2, 3.0), (3, 4.0), (4, 2.6)]:
        g = (p / 2) ** (1 / (p - 2))
        prob = ProblemSpec.power(N, 6.0, p)
        assert hamiltonian(prob, g, 0.0) == pytest.approx(0.0, abs=1e-14)
        prof = integrate_ivp(prob, g - 1e-12)
        assert prof.max_u() <= g + 1e-9


def test_hamiltonian_values():
    p = 3.5
    prob = ProblemSpec.power(3, 1.0, p)
    assert hamiltonian(prob, 1.0, 0.0) == pytest.approx(1 / p - 0.5)
    assert hamiltonian(prob, 1.0, math.sqrt((p - 2) / p)) == pytest.approx(0.0, abs=1e-15)


def test_blow_up_raises():
    with pytest.raises(BlowUpError) as exc:
        integrate_ivp(ProblemSpec.power(3, 10.0, 4.5), 2e4, ceiling=1e4)
    assert exc.value.r_stop < 10.0
    assert exc.value.direction == 1.0


def test_constant_energy_values():
    lam2 = radial_eigenvalue(2, 4.0, 2)
    assert constant_energy(ProblemSpec.power(2, 4.0, 1.95 + lam2)) == pytest.approx(7.604, abs=5e-4)
    assert constant_energy(ProblemSpec.power(4, 4.0, 2.1 + 1.64841)) == pytest.approx(294.63, abs=5e-3)


def test_energy_of_zero():
    prof = integrate_ivp(ProblemSpec.power(3, 2.0, 3.0), 1e-300)
    assert abs(energy(prof)) < 1e-200


def test_grid_refinement():
    prob = ProblemSpec.power(3, 4.0, 3.2)
    for tol in (1e-8, 1e-10):
        a = integrate_ivp(prob, 0.6, tol=tol).u[-1]
        b = integrate_ivp(prob, 0.6, tol=tol / 2).u[-1]
        assert abs(a - b) <= 10 * tol


def test_write_profile(tmp_path):
    prof = integrate_ivp(ProblemSpec.power(2, 3.0, 3.0), 0.5)
    path = tmp_path / "prof.dat"
    write_profile(prof, path, n_points=11)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# r u du")
    assert len(lines) == 12
    meta = json.loads((tmp_path / "prof.dat.json").read_text())
    assert meta["gamma"] == 0.5
