"""Numerical verification of the stationarity and boundary structure.

Residuals of the two Lagrange systems after scalar multiplier fitting,
second-order minimality probes around thermal states, entropy-rate
divergence at the boundary, the short-time entropy jump of boundary states,
and ladder closure of projector ranges.

Perturbation trials and scaling sweeps derive per-item seeds from the master
seed, so they are order independent and reproducible.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import (
    NoiseParams,
    thermalize_adjoint,
    thermalize_exact,
    thermalize_first_order,
)
from .errors import NotAProjector, TruncationWarning
from .fock import (
    RANK_FLOOR,
    DensityMatrix,
    FockSpace,
    ThermalSpec,
    _log_psd,
    _require_full_rank,
    annihilation,
    creation,
    energy,
    entropy_rate,
    identity,
    number_operator,
    thermal_state,
    vacuum_state,
    von_neumann_entropy,
)

__all__ = [
    "MultiplierFit",
    "ScalingReport",
    "MinimalityReport",
    "ClosureReport",
    "entropy_stationarity_residual",
    "stationarity_scaling",
    "energy_stationarity_residual",
    "perturbation_entropy_change",
    "minimality_perturbation_check",
    "boundary_rate",
    "boundary_entropy_scaling",
    "projector_closure_check",
    "sweep_diagonal_projectors",
]

DEGENERATE_COEFF_TOL = 1e-10


@dataclass(frozen=True)
class MultiplierFit:
    """Fitted scalar multipliers plus the residual of the stationarity system.

    ``residual_norm`` is a Frobenius defect for the entropy system and a
    normalized smallest singular value for the energy system;
    ``conditioning`` is the smallest singular value of the fit design matrix.
    """

    multipliers: dict[str, float]
    residual_norm: float
    conditioning: float
    branch: str = "generic"


@dataclass(frozen=True)
class ScalingReport:
    """A swept quantity against a strictly decreasing parameter list."""

    x_values: tuple[float, ...]
    quantity: tuple[float, ...]
    fitted_exponent: float
    fit_residual: float

    def __post_init__(self):
        if len(self.x_values) < 3:
            raise ValueError("need at least 3 sweep points")
        if any(a <= b for a, b in zip(self.x_values, self.x_values[1:])):
            raise ValueError("sweep values must be strictly decreasing")


@dataclass(frozen=True)
class MinimalityReport:
    """Outcome of the second-order perturbation probe at a thermal state."""

    beta: float
    dim: int
    trials: int
    t_step: float
    tol_second_order: float
    benchmark_slope: float
    violations: tuple[tuple[int, float, float], ...]  # (trial, t, value)
    min_change: float
    displacement_entropy_change: float
    displacement_energy_change: float


@dataclass(frozen=True)
class ClosureReport:
    """Whether a projector's range is invariant under both ladder operators."""

    closed: bool
    leakage: float
    operator: str | None = None
    witness: np.ndarray | None = None


def _hermitian_columns(mats: list[np.ndarray]) -> np.ndarray:
    """Stack Hermitian matrices as real design-matrix columns."""
    cols = []
    for m in mats:
        cols.append(np.concatenate([m.real.ravel(), m.imag.ravel()]))
    return np.stack(cols, axis=1)


def entropy_stationarity_residual(
    rho: DensityMatrix,
    p: NoiseParams,
    rank_floor: float = RANK_FLOOR,
) -> MultiplierFit:
    """Defect of the entropy-minimization stationarity system at ``rho``.

    The Hermitian multiplier is eliminated in closed form through the output
    condition, leaving the scalar system

        u (ln rho + I) - c I - Th_adj(ln z) = 0,      z = Th(rho),

    with Th the first-order map, whose best (u, c) is fit by least squares.
    The defect is evaluated on the interior levels ``0 .. d-3``: the
    generator's adjoint identities hold there exactly, while the top two
    levels carry O(gamma dt) truncation defects that would mask the
    O((gamma dt)^2) scaling of thermal states.

    For thermal input the residual scales as (gamma dt)^2; generic full-rank
    states keep a residual of order gamma dt times the non-thermal content of
    their log.
    """
    vals, vecs = _require_full_rank(rho, rank_floor, "entropy_stationarity_residual")
    log_rho = _log_psd(vals, vecs)
    z = thermalize_first_order(rho, p)
    z_vals, z_vecs = _require_full_rank(z, 0.0, "entropy_stationarity_residual(output)")
    log_z = _log_psd(z_vals, z_vecs)
    target = thermalize_adjoint(log_z, p, rho.space)

    k = rho.dim - 2
    eye = identity(rho.space)
    a_mat = (log_rho + eye)[:k, :k]
    i_mat = eye[:k, :k]
    m_mat = target[:k, :k]

    design = _hermitian_columns([a_mat, -i_mat])
    rhs = np.concatenate([m_mat.real.ravel(), m_mat.imag.ravel()])
    coef, _, _, svals = np.linalg.lstsq(design, rhs, rcond=None)
    u, c = float(coef[0]), float(coef[1])
    defect = u * a_mat - c * i_mat - m_mat
    return MultiplierFit(
        multipliers={"u": u, "c": c},
        residual_norm=float(np.linalg.norm(defect)),
        conditioning=float(svals[-1]),
    )


def stationarity_scaling(
    beta: float,
    space: FockSpace,
    gamma: float,
    dt_list: list[float],
) -> ScalingReport:
    """Entropy-stationarity residual of a thermal state over a dt sweep.

    Fits the log-log exponent of residual against dt; thermal states give an
    exponent near 2.
    """
    rho = thermal_state(ThermalSpec(beta, space))
    residuals = [
        entropy_stationarity_residual(rho, NoiseParams(gamma, dt)).residual_norm
        for dt in dt_list
    ]
    slope, resid = _loglog_fit(dt_list, residuals)
    return ScalingReport(tuple(dt_list), tuple(residuals), slope, resid)


def _loglog_fit(x: list[float], y: list[float]) -> tuple[float, float]:
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    design = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(design, ly, rcond=None)
    resid = float(np.max(np.abs(design @ coef - ly)))
    return float(coef[0]), resid


def energy_stationarity_residual(
    rho: DensityMatrix,
    p: NoiseParams | None = None,
    rank_floor: float = RANK_FLOOR,
) -> MultiplierFit:
    """Span test for the energy-minimization stationarity system.

    After the adjoint identity for the number operator folds the step
    parameters into the scalar constants, stationarity requires ln(rho) to be
    an affine combination of the number operator and the identity. The
    residual is the smallest singular value of the design matrix
    [ln rho + I, n, I], normalized by the largest: exactly zero when rho is
    thermal, order one for generic states. ``p`` is accepted for interface
    symmetry but does not enter the span condition.

    A fitted number-operator coefficient below 1e-10 signals the degenerate
    branch where the log is proportional to the identity (the infinite
    temperature limit); it is reported through ``branch``, not raised.
    """
    del p
    vals, vecs = _require_full_rank(rho, rank_floor, "energy_stationarity_residual")
    log_rho = _log_psd(vals, vecs)
    eye = identity(rho.space)
    n_op = number_operator(rho.space)
    design = _hermitian_columns([log_rho + eye, n_op, eye])
    _, svals, vt = np.linalg.svd(design, full_matrices=False)
    null = vt[-1]
    if null[np.argmax(np.abs(null))] < 0:
        null = -null
    coeffs = {
        "log_coeff": float(null[0]),
        "number_coeff": float(null[1]),
        "identity_coeff": float(null[2]),
    }
    branch = (
        "infinite-temperature"
        if abs(coeffs["number_coeff"]) < DEGENERATE_COEFF_TOL
        else "generic"
    )
    return MultiplierFit(
        multipliers=coeffs,
        residual_norm=float(svals[-1] / svals[0]),
        conditioning=float(svals[-1]),
        branch=branch,
    )


# ---------------------------------------------------------------------------
# second-order minimality


def _project_tangent(mat: np.ndarray, log_rho: np.ndarray, dim: int) -> np.ndarray:
    """Remove the identity and log components (Frobenius inner product)."""
    basis = []
    eye = np.eye(dim, dtype=complex)
    b0 = eye / np.linalg.norm(eye)
    basis.append(b0)
    b1 = log_rho - np.trace(log_rho).real / dim * eye
    nrm = np.linalg.norm(b1)
    if nrm > 1e-14:
        basis.append(b1 / nrm)
    out = mat.copy()
    for b in basis:
        out = out - np.real(np.trace(b.conj().T @ out)) * b
    return out


def perturbation_entropy_change(
    rho: DensityMatrix,
    p: NoiseParams,
    delta: np.ndarray,
    t: float,
    benchmark_slope: float,
) -> float:
    """Constraint-compensated output-entropy change along a straight segment.

    Measures S(Th(rho + t delta)) - S(Th(rho)) with the exact first-order
    terms subtracted and the second-order input-entropy slip of the
    linearized constraint removed through ``benchmark_slope`` (the local
    output/input entropy exchange rate of the thermal family). What remains
    is t^2/2 times the constrained second variation, the quantity whose
    non-negativity the minimality argument asserts. Returns 0.0 exactly for
    ``delta = 0``.
    """
    if not np.any(delta):
        return 0.0
    sp = rho.space
    vals, vecs = _require_full_rank(rho, 0.0, "perturbation_entropy_change")
    log_rho = _log_psd(vals, vecs)
    z = thermalize_first_order(rho, p)
    z_vals, z_vecs = _require_full_rank(z, 0.0, "perturbation_entropy_change(output)")
    log_z = _log_psd(z_vals, z_vecs)
    eye = identity(sp)
    grad_out = -thermalize_adjoint(log_z + eye, p, sp)
    grad_in = -(log_rho + eye)
    a1 = float(np.trace(delta.conj().T @ grad_out).real)
    b1 = float(np.trace(delta.conj().T @ grad_in).real)

    sigma = DensityMatrix(sp, rho.entries + t * delta)
    s_in0 = von_neumann_entropy(rho)
    s_out0 = von_neumann_entropy(z)
    s_in = von_neumann_entropy(sigma)
    s_out = von_neumann_entropy(thermalize_first_order(sigma, p))
    return (s_out - s_out0 - t * a1) - benchmark_slope * (s_in - s_in0 - t * b1)


def _thermal_family_slope(beta: float, space: FockSpace, p: NoiseParams) -> float:
    """d S_out / d S_in along the thermal family, by central difference."""
    db = 1e-3 * (1.0 + beta)
    lo = thermal_state(ThermalSpec(beta - db, space))
    hi = thermal_state(ThermalSpec(beta + db, space))
    num = von_neumann_entropy(thermalize_first_order(hi, p)) - von_neumann_entropy(
        thermalize_first_order(lo, p)
    )
    den = von_neumann_entropy(hi) - von_neumann_entropy(lo)
    return num / den


def minimality_perturbation_check(
    beta: float,
    space: FockSpace,
    p: NoiseParams,
    trials: int,
    t_step: float = 1e-4,
    seed: int = 0,
    tol_second_order: float = 1e-8,
    nu: complex = 0.1,
) -> MinimalityReport:
    """Probe second-order minimality of the output entropy at a thermal state.

    Each trial draws a random Hermitian direction, projects out the trace and
    first-order entropy components, normalizes it, and evaluates the
    compensated change (:func:`perturbation_entropy_change`) at +-t_step. A
    value below ``-tol_second_order * t_step**2`` counts as a violation;
    violations are reported as findings, never raised.

    The straight segments must stay inside the state space, so the thermal
    tail population has to dominate ``t_step``; a warning is emitted when it
    does not. Separately evaluates the phase-space translation direction
    -i[nu a + conj(nu) a^dagger, rho], for which the first-order output
    entropy change and the output energy change both vanish.
    """
    rho = thermal_state(ThermalSpec(beta, space))
    tail = rho.entries[-1, -1].real
    if t_step > 0.25 * tail:
        warnings.warn(
            f"t_step={t_step:.1e} is not small against the thermal tail "
            f"{tail:.1e}; perturbed segments may leave the state space",
            TruncationWarning,
            stacklevel=2,
        )
    d = space.dim
    vals, vecs = _require_full_rank(rho, 0.0, "minimality_perturbation_check")
    log_rho = _log_psd(vals, vecs)
    kappa = _thermal_family_slope(beta, space, p)

    violations = []
    min_change = math.inf
    for k in range(trials):
        rng = np.random.default_rng((seed, k))
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        direction = _project_tangent(0.5 * (g + g.conj().T), log_rho, d)
        nrm = np.linalg.norm(direction)
        if nrm < 1e-12:
            continue
        direction /= nrm
        for t in (+t_step, -t_step):
            change = perturbation_entropy_change(rho, p, direction, t, kappa)
            min_change = min(min_change, change)
            if change < -tol_second_order * t_step**2:
                violations.append((k, t, change))

    a = annihilation(space)
    x_op = nu * a + np.conj(nu) * a.conj().T
    disp_dir = -1j * (x_op @ rho.entries - rho.entries @ x_op)
    z = thermalize_first_order(rho, p)
    z_plus = thermalize_first_order(DensityMatrix(space, rho.entries + t_step * disp_dir), p)
    z_minus = thermalize_first_order(DensityMatrix(space, rho.entries - t_step * disp_dir), p)
    # Odd part of the change: the first-order coefficient times t_step, free
    # of the quadratic term that any direction carries.
    disp_ds = 0.5 * (von_neumann_entropy(z_plus) - von_neumann_entropy(z_minus))
    disp_de = energy(z_plus) - energy(z)

    return MinimalityReport(
        beta=beta,
        dim=d,
        trials=trials,
        t_step=t_step,
        tol_second_order=tol_second_order,
        benchmark_slope=kappa,
        violations=tuple(violations),
        min_change=float(min_change) if trials else 0.0,
        displacement_entropy_change=float(disp_ds),
        displacement_energy_change=float(disp_de),
    )


# ---------------------------------------------------------------------------
# boundary behavior


def boundary_rate(
    rho_pure: DensityMatrix, gamma: float, epsilon_list: list[float]
) -> ScalingReport:
    """Entropy rate of (1-eps) |psi><psi| + eps I/d against ln(1/eps).

    ``rho_pure`` must be rank one. The rate grows asymptotically linearly in
    ln(1/eps); the fitted slope is returned as ``fitted_exponent``.
    """
    vals = np.linalg.eigvalsh(rho_pure.entries)
    if vals[-2] > 1e-10:
        raise ValueError(f"input is not rank one (second eigenvalue {vals[-2]:.3e})")
    if any(not 0.0 < e < 1.0 for e in epsilon_list):
        raise ValueError("epsilon values must lie in (0, 1)")
    d = rho_pure.dim
    mixed = np.eye(d, dtype=complex) / d
    rates = []
    for eps in epsilon_list:
        sigma = DensityMatrix(rho_pure.space, (1.0 - eps) * rho_pure.entries + eps * mixed)
        rates.append(entropy_rate(sigma, gamma))
    lx = np.log(1.0 / np.asarray(epsilon_list))
    design = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(design, np.asarray(rates), rcond=None)
    resid = float(np.max(np.abs(design @ coef - np.asarray(rates))))
    return ScalingReport(tuple(epsilon_list), tuple(rates), float(coef[0]), resid)


def boundary_entropy_scaling(
    gamma: float, dt_list: list[float], space: FockSpace, steps: int = 32
) -> ScalingReport:
    """Short-time entropy jump of the vacuum against -gamma dt ln(gamma dt).

    Integrates the master equation from the vacuum for each dt and reports
    the ratio dS / (-gamma dt ln(gamma dt)); the ratios converge slowly (like
    1/ln) toward 1, so neighboring decades agree at the ten-percent level.
    ``fitted_exponent`` is the log-log slope of dS against dt.
    """
    if len(dt_list) < 3:
        raise ValueError("need at least 3 dt values")
    if dt_list[0] / dt_list[-1] < 99.0:
        raise ValueError("dt_list should span at least two decades")
    vac = vacuum_state(space)
    ratios = []
    jumps = []
    for dt in dt_list:
        if gamma * dt >= 0.1:
            raise ValueError(f"gamma*dt = {gamma * dt} too large for the short-time regime")
        ds = von_neumann_entropy(thermalize_exact(vac, NoiseParams(gamma, dt), steps=steps))
        jumps.append(ds)
        ratios.append(ds / (-gamma * dt * math.log(gamma * dt)))
    slope, resid = _loglog_fit(dt_list, jumps)
    return ScalingReport(tuple(dt_list), tuple(ratios), slope, resid)


# ---------------------------------------------------------------------------
# kernel closure


def projector_closure_check(p_perp: np.ndarray, space: FockSpace) -> ClosureReport:
    """Test whether range(P) is invariant under both ladder operators.

    Raises :class:`NotAProjector` unless P is an orthogonal projector to
    1e-12. On breach, returns the offending operator name and a witness
    vector from range(P) whose image leaks out of the range.
    """
    p_mat = np.asarray(p_perp, dtype=complex)
    if np.max(np.abs(p_mat - p_mat.conj().T)) > 1e-12:
        raise NotAProjector("P is not Hermitian at 1e-12")
    if np.max(np.abs(p_mat @ p_mat - p_mat)) > 1e-12:
        raise NotAProjector("P^2 != P at 1e-12")
    comp = np.eye(space.dim, dtype=complex) - p_mat
    worst = ClosureReport(closed=True, leakage=0.0)
    for name, op in (("a", annihilation(space)), ("a_dagger", creation(space))):
        leak_mat = comp @ op @ p_mat
        leakage = float(np.linalg.norm(leak_mat, 2))
        if leakage > 1e-12 and leakage > worst.leakage:
            cols = np.linalg.norm(leak_mat, axis=0)
            j = int(np.argmax(cols))
            witness = p_mat[:, j] / np.linalg.norm(p_mat[:, j])
            worst = ClosureReport(False, leakage, name, witness)
    return worst


def sweep_diagonal_projectors(space: FockSpace) -> list[tuple[tuple[int, ...], ClosureReport]]:
    """Exhaustively check every proper nonzero Fock-diagonal projector.

    Intended for small dimensions (2^d - 2 subsets); every proper subset of
    levels breaches closure under a or a^dagger on the truncated space.
    """
    if space.dim > 16:
        raise ValueError("exhaustive sweep is exponential; use dim <= 16")
    results = []
    d = space.dim
    for mask in range(1, 2**d - 1):
        levels = tuple(j for j in range(d) if mask >> j & 1)
        p_mat = np.zeros((d, d), dtype=complex)
        for j in levels:
            p_mat[j, j] = 1.0
        results.append((levels, projector_closure_check(p_mat, space)))
    return results
