import math

import numpy as np
import pytest

import moelab as ml
from moelab import FockSpace, NoiseParams, ThermalSpec


def random_hermitian(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (g + g.conj().T)


# ---------------------------------------------------------------------------
# generator


def test_generator_on_vacuum():
    sp = FockSpace(16)
    out = ml.lindblad_apply(ml.vacuum_state(sp))
    expected = np.zeros((16, 16), dtype=complex)
    expected[1, 1] = 1.0
    expected[0, 0] = -1.0
    assert np.abs(out - expected).max() == 0.0


def test_generator_traceless_and_hermitian():
    sp = FockSpace(16)
    for k in range(100):
        rho = ml.random_density_matrix(k, sp, 16)
        out = ml.lindblad_apply(rho)
        assert abs(np.trace(out).real) < 1e-13
        assert np.abs(out - out.conj().T).max() < 1e-13


def test_generator_energy_pump_interior():
    # tr[N(rho) n] = 1 for states with no population on the top two levels
    sp_small = FockSpace(16)
    sp = FockSpace(20)
    n_op = ml.number_operator(sp)
    for k in range(20):
        rho = ml.embed(ml.random_density_matrix(k, sp_small, 16), sp)
        pump = np.trace(ml.lindblad_apply(rho) @ n_op).real
        assert pump == pytest.approx(1.0, abs=1e-10)


def test_adjoint_unital():
    sp = FockSpace(12)
    out = ml.lindblad_adjoint(ml.identity(sp), sp)
    assert np.abs(out).max() < 1e-13


def test_adjoint_of_number_operator():
    # (k+1)^2 + k(k-1) - (2k+1)k = 1 level by level away from the edge
    sp = FockSpace(12)
    out = ml.lindblad_adjoint(ml.number_operator(sp), sp)
    assert np.abs(np.diag(out).real[:10] - 1.0).max() < 1e-13


def test_adjoint_duality_random_pairs():
    sp = FockSpace(16)
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = random_hermitian(rng, 16)
        b = random_hermitian(rng, 16)
        lhs = np.trace(ml.lindblad_apply(a, sp) @ b).real
        rhs = np.trace(a @ ml.lindblad_adjoint(b, sp)).real
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_adjoint_agrees_with_apply():
    # N is self-adjoint; the two independent implementations must agree
    sp = FockSpace(14)
    rng = np.random.default_rng(5)
    x = random_hermitian(rng, 14)
    assert np.abs(ml.lindblad_apply(x, sp) - ml.lindblad_adjoint(x, sp)).max() < 1e-13


def test_bare_matrix_requires_space():
    with pytest.raises(ValueError):
        ml.lindblad_apply(np.eye(4, dtype=complex))


# ---------------------------------------------------------------------------
# first-order map


def test_first_order_identity_at_zero_energy():
    sp = FockSpace(10)
    rho = ml.random_density_matrix(4, sp, 10)
    out = ml.thermalize_first_order(rho, NoiseParams(1e-12, 1e-12))
    assert np.abs(out.entries - rho.entries).max() < 1e-12


def test_first_order_energy_drift_thermal():
    sp = FockSpace(40)
    rho = ml.thermal_state(ThermalSpec(1.0, sp))
    out = ml.thermalize_first_order(rho, NoiseParams(1.0, 1e-3))
    assert ml.energy(out) - ml.energy(rho) == pytest.approx(1e-3, abs=1e-9)


def test_first_order_vacuum_populations():
    sp = FockSpace(8)
    out = ml.thermalize_first_order(ml.vacuum_state(sp), NoiseParams(1.0, 1e-3))
    pops = np.diag(out.entries).real
    assert pops[0] == pytest.approx(1.0 - 1e-3, abs=1e-15)
    assert pops[1] == pytest.approx(1e-3, abs=1e-15)
    assert np.abs(pops[2:]).max() < 1e-15


def test_first_order_trace_preserving():
    sp = FockSpace(12)
    for k in range(20):
        rho = ml.random_density_matrix(k, sp, 12)
        out = ml.thermalize_first_order(rho, NoiseParams(1.0, 1e-3))
        assert abs(np.trace(out.entries).real - 1.0) < 1e-12


def test_noise_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(1.0, 0.5)
    NoiseParams(1.0, 0.5, allow_large_step=True)
    with pytest.raises(ValueError):
        NoiseParams(-1.0, 0.1)


# ---------------------------------------------------------------------------
# exact map


def test_exact_vs_first_order_quadratic_gap():
    sp = FockSpace(20)
    rho = ml.thermal_state(ThermalSpec(1.0, sp))
    gaps = []
    for dt in (2e-2, 1e-2):
        exact = ml.thermalize_exact(rho, NoiseParams(1.0, dt), steps=64)
        first = ml.thermalize_first_order(rho, NoiseParams(1.0, dt))
        gaps.append(np.linalg.norm(exact.entries - first.entries))
    ratio = gaps[0] / gaps[1]
    assert abs(ratio - 4.0) <= 0.6  # 15% of 4


def test_exact_energy_growth():
    sp = FockSpace(30)
    rho = ml.embed(ml.thermal_state(ThermalSpec(2.0, FockSpace(18))), sp)
    p = NoiseParams(1.0, 0.05)
    out = ml.thermalize_exact(rho, p, steps=64)
    assert ml.energy(out) - ml.energy(rho) == pytest.approx(0.05, abs=1e-8)


def test_exact_step_halving_converged():
    sp = FockSpace(16)
    rho = ml.thermal_state(ThermalSpec(1.0, sp))
    p = NoiseParams(1.0, 0.01)
    a = ml.thermalize_exact(rho, p, steps=64)
    b = ml.thermalize_exact(rho, p, steps=128)
    assert np.linalg.norm(a.entries - b.entries) < 1e-10


def test_exact_adjoint_duality():
    sp = FockSpace(12)
    p = NoiseParams(1.0, 1e-2)
    rng = np.random.default_rng(11)
    for k in range(20):
        rho = ml.random_density_matrix(k, sp, 12)
        x = random_hermitian(rng, 12)
        lhs = np.trace(ml.thermalize_exact(rho, p, steps=16).entries @ x).real
        rhs = np.trace(rho.entries @ ml.thermalize_exact_adjoint(x, p, steps=16, space=sp)).real
        assert lhs == pytest.approx(rhs, abs=1e-12)


# ---------------------------------------------------------------------------
# observable adjoint


def test_th_adjoint_identity():
    sp = FockSpace(10)
    p = NoiseParams(1.0, 1e-3)
    out = ml.thermalize_adjoint(ml.identity(sp), p, sp)
    assert np.abs(out - np.eye(10)).max() < 1e-13


def test_th_adjoint_number_operator():
    sp = FockSpace(10)
    p = NoiseParams(1.0, 1e-3)
    out = ml.thermalize_adjoint(ml.number_operator(sp), p, sp)
    expected = np.arange(10) + 1e-3
    assert np.abs(np.diag(out).real[:8] - expected[:8]).max() < 1e-15


def test_th_adjoint_duality():
    sp = FockSpace(16)
    p = NoiseParams(1.0, 1e-3)
    rng = np.random.default_rng(7)
    for k in range(100):
        rho = ml.random_density_matrix(k, sp, 16)
        x = random_hermitian(rng, 16)
        lhs = np.trace(ml.thermalize_first_order(rho, p).entries @ x).real
        rhs = np.trace(rho.entries @ ml.thermalize_adjoint(x, p, sp)).real
        assert lhs == pytest.approx(rhs, abs=1e-12)


# ---------------------------------------------------------------------------
# quadrature channel


def test_grid_weights_normalized():
    grid = ml.gaussian_displacement_grid(0.3, 40)
    assert abs(sum(w for _, w in grid.nodes) - 1.0) < 1e-12
    assert grid.mean_energy == pytest.approx(0.3, abs=1e-12)


def test_channel_zero_energy_identity():
    sp = FockSpace(12)
    rho = ml.random_density_matrix(8, sp, 12)
    out = ml.additive_noise_channel(rho, 0.0, ml.gaussian_displacement_grid(0.0))
    assert np.array_equal(out.entries, rho.entries)


def test_channel_grid_mismatch_rejected():
    sp = FockSpace(12)
    rho = ml.vacuum_state(sp)
    grid = ml.gaussian_displacement_grid(0.2, 20)
    with pytest.raises(ValueError):
        ml.additive_noise_channel(rho, 0.3, grid)


def test_channel_vacuum_to_thermal():
    # a Gaussian mixture of coherent states is thermal with matching mean
    # occupation
    sp = FockSpace(40)
    out = ml.additive_noise_channel(
        ml.vacuum_state(sp), 0.3, ml.gaussian_displacement_grid(0.3, 40)
    )
    ref = ml.thermal_state(ThermalSpec(math.log(1 + 1 / 0.3), sp))
    assert ml.trace_distance(out, ref) < 1e-8


def test_channel_semigroup():
    sp = FockSpace(40)
    vac = ml.vacuum_state(sp)
    direct = ml.additive_noise_channel(vac, 0.3, ml.gaussian_displacement_grid(0.3, 40))
    stage1 = ml.additive_noise_channel(vac, 0.1, ml.gaussian_displacement_grid(0.1, 40))
    stage2 = ml.additive_noise_channel(stage1, 0.2, ml.gaussian_displacement_grid(0.2, 40))
    assert ml.trace_distance(stage2, direct) < 1e-7


def test_channel_thermal_closure():
    # thermal(n_bar) -> thermal(n_bar + delta_e)
    sp = FockSpace(40)
    n_in, de = 0.2, 0.15
    rho = ml.thermal_state(ThermalSpec(math.log(1 + 1 / n_in), sp))
    out = ml.additive_noise_channel(rho, de, ml.gaussian_displacement_grid(de, 40))
    ref = ml.thermal_state(ThermalSpec(math.log(1 + 1 / (n_in + de)), sp))
    assert ml.trace_distance(out, ref) < 1e-8


def test_channel_truncation_breach():
    sp = FockSpace(6)
    with pytest.raises(ml.TruncationBreach):
        ml.additive_noise_channel(
            ml.vacuum_state(sp), 2.0, ml.gaussian_displacement_grid(2.0, 20)
        )


def test_displacement_covariance():
    # Th(D rho D+) = D Th(rho) D+ for states supported well below the cutoff
    sp = FockSpace(24)
    p = NoiseParams(1.0, 1e-3)
    mu = 0.8
    rho = ml.embed(ml.thermal_state(ThermalSpec(1.5, FockSpace(10))), sp)
    d_op = ml.displacement(mu, sp)
    displaced = ml.DensityMatrix(sp, d_op @ rho.entries @ d_op.conj().T)
    lhs = ml.thermalize_first_order(displaced, p).entries
    rhs = d_op @ ml.thermalize_first_order(rho, p).entries @ d_op.conj().T
    assert np.linalg.norm(lhs - rhs) < 1e-8


def test_exact_first_order_consistency_rate():
    # gap between exact and first order shrinks like (gamma dt)^2
    sp = FockSpace(16)
    rho = ml.thermal_state(ThermalSpec(1.0, sp))
    gaps = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        exact = ml.thermalize_exact(rho, NoiseParams(1.0, dt), steps=32)
        first = ml.thermalize_first_order(rho, NoiseParams(1.0, dt))
        gaps.append(np.linalg.norm(exact.entries - first.entries))
    for a, b in zip(gaps, gaps[1:]):
        assert abs(a / b - 4.0) < 0.6
