import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from test.test_utils import brute_laplacian
from vmtunet.core.discretization import (
    evolve,
    max_abs_w_second,
    run_scheme,
    stability_constants,
    tfpm_lambda_c0,
    tfpm_laplacian,
    u_step,
    v_step,
)
from vmtunet.core.discretization.stability import stability_coefficients
from vmtunet.core.errors import BadMultipliers, Diverged, ShapeMismatch
from vmtunet.core.field.field import ScalarField, double_well_prime, gl_energy, laplacian_fdm
from vmtunet.core.models.models import BoundaryKind, CHParams, Scheme


def ansatz_patch(u_center: float, eps1: float, eps2: float, h: float):
    """3x3 samples of c0 + a exp(lambda x) whose center value is ``u_center``."""
    lam, c0 = tfpm_lambda_c0(u_center, eps1, eps2)
    a = u_center - c0
    x = np.array([-h, 0.0, h])
    values = np.tile(c0 + a * np.exp(lam * x), (3, 1))
    return values, lam**2 * a


@pytest.mark.parametrize(
    "u, eps1, eps2, lam, c0",
    [
        (0.0, 1.0, 1.0, np.sqrt(2.0), 0.0),
        (1.0, 1.0, 1.0, np.sqrt(6.0), 1.0),
        (0.5, 2.0, 0.5, np.sqrt(3.0), 0.5),
    ],
)
def test_tfpm_lambda_c0_closed_forms(u, eps1, eps2, lam, c0):
    got_lam, got_c0 = tfpm_lambda_c0(u, eps1, eps2)
    assert got_lam == pytest.approx(lam, rel=1e-12)
    assert got_c0 == pytest.approx(c0, abs=1e-15)


@pytest.mark.parametrize("value", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("bc", list(BoundaryKind))
def test_tfpm_zero_on_well_constants(value, bc):
    out = tfpm_laplacian(ScalarField.constant(value, 5, 5, bc), 1.0, 1.0, 1.0)
    assert np.all(out.values == 0.0)


def test_tfpm_nonzero_on_other_constants():
    out = tfpm_laplacian(ScalarField.constant(0.25, 5, 5), 1.0, 1.0, 1.0)
    assert np.all(np.abs(out.values) > 1e-3)


@pytest.mark.parametrize("u_center", [0.1, 0.3, 0.8, 1.2])
def test_tfpm_exact_on_exponential_ansatz(u_center):
    values, analytic = ansatz_patch(u_center, 1.0, 1.0, 1.0)
    got = tfpm_laplacian(ScalarField(values), 1.0, 1.0, 1.0).values[1, 1]
    assert abs(got - analytic) <= 1e-10 * abs(analytic)


def test_tfpm_beats_fdm_on_ansatz_as_h_shrinks():
    fdm_errors = []
    for h in (1.0, 0.5, 0.25):
        values, analytic = ansatz_patch(0.3, 1.0, 1.0, h)
        field = ScalarField(values)
        tfpm_err = abs(tfpm_laplacian(field, 1.0, 1.0, h).values[1, 1] - analytic)
        fdm_err = abs(laplacian_fdm(field, h).values[1, 1] - analytic)
        assert tfpm_err <= 1e-10 * abs(analytic)
        assert tfpm_err < fdm_err
        fdm_errors.append(fdm_err)
    assert fdm_errors[0] > fdm_errors[1] > fdm_errors[2]
    # second order: halving h cuts the error about four times
    assert fdm_errors[1] / fdm_errors[2] == pytest.approx(4.0, rel=0.1)


def test_tfpm_rejects_nonpositive_params():
    with pytest.raises(ValueError):
        tfpm_laplacian(ScalarField.constant(0.0, 3, 3), 1.0, 1.0, 0.0)


def test_v_step_constants():
    p = CHParams()
    assert np.all(v_step(ScalarField.constant(0.5, 4, 4), p, Scheme.FDM).values == 0.0)
    for scheme in Scheme:
        assert np.all(v_step(ScalarField.constant(0.0, 4, 4), p, scheme).values == 0.0)


def test_v_step_fdm_matches_brute_force(rng):
    values = rng.random((8, 8))
    v = v_step(ScalarField(values), CHParams(), Scheme.FDM).values
    expected = brute_laplacian(values, 1.0, periodic=False) - double_well_prime(values)
    assert_allclose(v, expected, rtol=0, atol=1e-12)


def test_v_step_keeps_bc(rng):
    u = ScalarField(rng.random((5, 5)), BoundaryKind.PERIODIC)
    assert v_step(u, CHParams()).bc == BoundaryKind.PERIODIC


def test_u_step_constant_v_leaves_u(rng):
    u = ScalarField(rng.random((6, 6)))
    v = ScalarField.constant(2.0, 6, 6)
    F = ScalarField.constant(0.0, 6, 6)
    assert_array_equal(u_step(u, v, F, CHParams(tau=0.3)).values, u.values)


def test_u_step_force_only():
    zero = ScalarField.constant(0.0, 4, 4)
    out = u_step(zero, zero, ScalarField.constant(1.0, 4, 4), CHParams(tau=0.5))
    assert np.all(out.values == -0.5)


def test_u_step_matches_brute_force(rng):
    u, v, F = (rng.random((7, 7)) for _ in range(3))
    p = CHParams(tau=0.2, h=0.5)
    got = u_step(ScalarField(u), ScalarField(v), ScalarField(F), p).values
    expected = u - p.tau * brute_laplacian(v, p.h, periodic=False) - p.tau * F
    assert_allclose(got, expected, rtol=0, atol=1e-12)


def test_u_step_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        u_step(
            ScalarField.constant(0.0, 4, 4),
            ScalarField.constant(0.0, 4, 4),
            ScalarField.constant(0.0, 5, 4),
            CHParams(),
        )


def test_evolve_zero_is_fixed_point():
    u, report = evolve(ScalarField.constant(0.0, 6, 6), None, CHParams(M=5))
    assert np.all(u.values == 0.0)
    assert len(report.steps) == 5
    assert all(s.norm_u == 0.0 and s.norm_lap_u == 0.0 for s in report.steps)
    assert report.C >= 0.0
    assert report.holds


def test_evolve_one_step_is_manual_composition(rng):
    p = CHParams(M=1, tau=0.01)
    u0 = ScalarField(rng.random((8, 8)))
    F = ScalarField(rng.random((8, 8)))
    manual = u_step(u0, v_step(u0, p, Scheme.TFPM), F, p)
    u, _ = evolve(u0, F, p, Scheme.TFPM)
    assert_array_equal(u.values, manual.values)


def test_force_provider_sees_every_step():
    seen = []

    def provider(step, u):
        seen.append(step)
        return u.with_values(np.zeros(u.shape))

    run_scheme(ScalarField.constant(0.2, 4, 4), provider, CHParams(M=4))
    assert seen == [0, 1, 2, 3]


def test_steady_tol_stops_early():
    _, trace = run_scheme(ScalarField.constant(0.0, 4, 4), None, CHParams(M=10), steady_tol=1e-6)
    assert trace.steps == 1


def smooth_bump(size: int = 16) -> np.ndarray:
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    c = (size - 1) / 2.0
    return 0.5 + 0.4 * np.exp(-((rows - c) ** 2 + (cols - c) ** 2) / 20.0)


def test_energy_decreases_on_smooth_bump():
    p = CHParams(M=50, tau=0.01, h=1.0, eps1=1.0, eps2=1.0)
    _, trace = run_scheme(ScalarField(smooth_bump()), None, p, Scheme.FDM)
    energies = [gl_energy(ScalarField(u), p.eps1, p.eps2, p.h) for u in trace.u]
    assert all(b <= a + 1e-9 for a, b in zip(energies, energies[1:]))


@pytest.mark.parametrize("scheme", list(Scheme))
def test_periodic_evolution_conserves_mean(rng, scheme):
    p = CHParams(M=100, tau=0.01)
    u0 = ScalarField(0.5 + 0.1 * rng.standard_normal((12, 12)), BoundaryKind.PERIODIC)
    _, trace = run_scheme(u0, None, p, scheme)
    means = [u.mean() for u in trace.u]
    assert max(abs(b - a) for a, b in zip(means, means[1:])) <= 1e-10


def test_evolve_diverges_with_huge_step(rng):
    with pytest.raises(Diverged) as info:
        evolve(ScalarField(rng.random((8, 8))), None, CHParams(M=20, tau=100.0), Scheme.FDM)
    assert info.value.step >= 1
    assert info.value.value > 1e6


def test_stability_coefficients_substitution():
    A, B, C, D = stability_coefficients(
        CHParams(tau=0.5), L=2.0, delta=1.0, gamma=4.0, M_F=0.0, C_delta=0.0
    )
    assert A == pytest.approx(0.25)
    assert B == pytest.approx(0.125)
    assert D == pytest.approx(2.5)
    assert C == pytest.approx(2.0)


def test_stability_rejects_bad_multipliers():
    p = CHParams(tau=0.5)
    with pytest.raises(BadMultipliers):
        stability_coefficients(p, 2.0, delta=0.5, gamma=4.0, M_F=0.0, C_delta=0.0)
    with pytest.raises(BadMultipliers):
        stability_coefficients(p, 2.0, delta=1.0, gamma=2.0, M_F=0.0, C_delta=0.0)


def test_lipschitz_bound_on_unit_interval():
    assert max_abs_w_second(0.0, 1.0) == pytest.approx(2.0)
    # vertex at 1/2 dominates the endpoints
    assert max_abs_w_second(0.4, 0.6) == pytest.approx(1.0)
    assert max_abs_w_second(0.6, 0.9) == pytest.approx(abs(12 * 0.81 - 12 * 0.9 + 2))


def test_stability_holds_on_smooth_run(tmp_path):
    p = CHParams(M=30, tau=0.01)
    u0 = ScalarField(smooth_bump())
    F = u0.with_values(np.full(u0.shape, 0.05))
    _, trace = run_scheme(u0, F, p, Scheme.TFPM)
    report = stability_constants(trace, p)
    assert report.A > 0 and report.B > 0
    assert report.delta == pytest.approx(2 * p.tau)
    assert report.M_F == pytest.approx(np.sqrt(16 * 16 * 0.05**2))
    assert report.holds and report.violations == []
    path = tmp_path / "stability.csv"
    report.to_csv(str(path))
    header = path.read_text().splitlines()[0]
    assert header == "step,norm_u,norm_lap_u,lhs,rhs,holds"
