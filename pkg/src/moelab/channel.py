"""The additive classical noise channel and its infinitesimal generator.

Public surface: the generator ``N`` (``lindblad_apply``) and its adjoint, the
first-order short-time map Th(rho) = rho + gamma dt N(rho), an exact RK4
semigroup integrator, the Gaussian-displacement quadrature channel, and the
adjoint action on observables.

All maps are pure functions over immutable inputs. Quadrature terms and
integrator substeps are summed in a fixed order, so results are bitwise
deterministic for fixed inputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import PositivityLoss, TruncationBreach
from .fock import (
    DensityMatrix,
    FockSpace,
    _photon_exchange_generator,
    annihilation,
    creation,
    displacement,
    identity,
)

log = logging.getLogger(__name__)

DEFAULT_NODES_PER_AXIS = 40
POSITIVITY_TOL = -1e-10

__all__ = [
    "NoiseParams",
    "QuadratureGrid",
    "gaussian_displacement_grid",
    "lindblad_apply",
    "lindblad_adjoint",
    "thermalize_first_order",
    "thermalize_exact",
    "thermalize_adjoint",
    "thermalize_exact_adjoint",
    "additive_noise_channel",
]


@dataclass(frozen=True)
class NoiseParams:
    """Photon add/subtract rate ``gamma`` (1/time) and time step ``dt``.

    The first-order map is only meaningful for gamma*dt << 1; construction
    enforces gamma*dt <= 0.1 unless ``allow_large_step`` is set.
    """

    gamma: float
    dt: float
    allow_large_step: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.gamma * self.dt > 0.1 and not self.allow_large_step:
            raise ValueError(
                f"gamma*dt = {self.gamma * self.dt:.3g} > 0.1 breaks the first-order "
                "regime; pass allow_large_step=True to override"
            )

    @property
    def delta_e(self) -> float:
        """Mean energy added per step, gamma * dt (photon units)."""
        return self.gamma * self.dt


@dataclass(frozen=True)
class QuadratureGrid:
    """Displacement nodes (mu, weight) for the Gaussian noise average.

    Weights must sum to 1 within 1e-12 (normalized Gaussian measure); the
    weighted mean of |mu|^2 equals the energy the grid was built for.
    """

    nodes_per_axis: int
    nodes: tuple[tuple[complex, float], ...]

    def __post_init__(self):
        total = sum(w for _, w in self.nodes)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, expected 1 within 1e-12")

    @property
    def mean_energy(self) -> float:
        """sum_k w_k |mu_k|^2, the delta_e the grid represents."""
        return float(sum(w * abs(mu) ** 2 for mu, w in self.nodes))


def gaussian_displacement_grid(
    delta_e: float, nodes_per_axis: int = DEFAULT_NODES_PER_AXIS
) -> QuadratureGrid:
    """Product Gauss-Hermite grid for exp(-|mu|^2/delta_e)/(pi delta_e) d^2 mu.

    One-dimensional nodes/weights come from ``numpy.polynomial.hermite``;
    the substitution mu = sqrt(delta_e) (s + i t) absorbs the Gaussian
    weight, so the quadrature converges superalgebraically for entire
    integrands. ``delta_e = 0`` yields the single node (0, 1).
    """
    if delta_e < 0:
        raise ValueError(f"delta_e must be >= 0, got {delta_e}")
    if nodes_per_axis < 1:
        raise ValueError("nodes_per_axis must be >= 1")
    if delta_e == 0.0:
        return QuadratureGrid(1, ((0.0 + 0.0j, 1.0),))
    t, w = np.polynomial.hermite.hermgauss(nodes_per_axis)
    scale = np.sqrt(delta_e)
    nodes = []
    for ti, wi in zip(t, w):
        for tj, wj in zip(t, w):
            nodes.append((complex(scale * ti, scale * tj), float(wi * wj / np.pi)))
    return QuadratureGrid(nodes_per_axis, tuple(nodes))


def _as_matrix(x) -> np.ndarray:
    return x.entries if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


def _space_of(x, space: FockSpace | None) -> FockSpace:
    if isinstance(x, DensityMatrix):
        return x.space
    if space is None:
        raise ValueError("a FockSpace is required when passing a bare matrix")
    return space


def lindblad_apply(x, space: FockSpace | None = None) -> np.ndarray:
    """Generator N(x) = (1/2)(2 a x a+ - a+a x - x a+a + 2 a+ x a - a a+ x - x a a+).

    Hermitian and traceless for Hermitian input. The gamma factor is not
    included. Accepts a :class:`DensityMatrix` or a bare matrix plus
    ``space``.
    """
    sp = _space_of(x, space)
    return _photon_exchange_generator(_as_matrix(x), sp)


def lindblad_adjoint(x, space: FockSpace | None = None) -> np.ndarray:
    """Adjoint of N under tr[N(A) B] = tr[A N*(B)].

    N is self-adjoint, so this agrees with :func:`lindblad_apply`; it is
    implemented independently from the adjoint ordering (left/right
    multiplications swapped) and tested for agreement.
    """
    sp = _space_of(x, space)
    mat = _as_matrix(x)
    a = annihilation(sp)
    adag = creation(sp)
    m = adag @ a + a @ adag
    return adag @ mat @ a + a @ mat @ adag - 0.5 * (mat @ m + m @ mat)


def _finalize_state(mat: np.ndarray, space: FockSpace, op: str) -> DensityMatrix:
    """Validate positivity, clip sub-tolerance negatives, renormalize."""
    mat = 0.5 * (mat + mat.conj().T)
    vals, vecs = np.linalg.eigh(mat)
    if vals[0] < POSITIVITY_TOL:
        raise PositivityLoss(f"{op}: smallest output eigenvalue {vals[0]:.3e} < {POSITIVITY_TOL}")
    if vals[0] < 0.0:
        # Noise-level negatives only; clip and renormalize so the result
        # satisfies the DensityMatrix invariants.
        vals = np.clip(vals, 0.0, None)
        mat = (vecs * (vals / vals.sum())) @ vecs.conj().T
        mat = 0.5 * (mat + mat.conj().T)
    return DensityMatrix(space, mat)


def thermalize_first_order(rho: DensityMatrix, p: NoiseParams) -> DensityMatrix:
    """Short-time map rho + gamma dt N(rho).

    Trace preserving by construction; adds mean energy gamma*dt for states
    supported away from the truncation edge. Raises
    :class:`PositivityLoss` if the output dips below -1e-10; use
    :func:`thermalize_exact` when gamma*dt is not small against the
    state's smallest eigenvalue.
    """
    out = rho.entries + p.delta_e * _photon_exchange_generator(rho.entries, rho.space)
    return _finalize_state(out, rho.space, "thermalize_first_order")


def thermalize_exact(rho: DensityMatrix, p: NoiseParams, steps: int = 32) -> DensityMatrix:
    """Integrate d rho/dt = gamma N(rho) over [0, dt] with classic RK4.

    ``steps`` substeps of size dt/steps; the trace is renormalized after each
    substep and the accumulated drift logged at DEBUG level (the generator is
    exactly traceless, so the drift is roundoff-sized). Agrees with
    :func:`thermalize_first_order` to O((gamma dt)^2).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    sp = rho.space
    h = p.gamma * p.dt / steps
    mat = np.array(rho.entries)
    drift = 0.0
    for _ in range(steps):
        k1 = _photon_exchange_generator(mat, sp)
        k2 = _photon_exchange_generator(mat + 0.5 * h * k1, sp)
        k3 = _photon_exchange_generator(mat + 0.5 * h * k2, sp)
        k4 = _photon_exchange_generator(mat + h * k3, sp)
        mat = mat + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tr = mat.trace().real
        drift += abs(tr - 1.0)
        mat /= tr
    if drift:
        log.debug("thermalize_exact trace drift over %d steps: %.3e", steps, drift)
    return _finalize_state(mat, sp, "thermalize_exact")


def thermalize_adjoint(x, p: NoiseParams, space: FockSpace | None = None) -> np.ndarray:
    """Adjoint map on observables: x + gamma dt N*(x).

    Satisfies tr[Th(rho) X] = tr[rho Th*(X)] for the first-order map; maps
    the identity to itself and the number operator to n + gamma dt on
    interior levels.
    """
    sp = _space_of(x, space)
    mat = _as_matrix(x)
    return mat + p.delta_e * lindblad_adjoint(mat, sp)


def thermalize_exact_adjoint(
    x, p: NoiseParams, steps: int = 32, space: FockSpace | None = None
) -> np.ndarray:
    """Adjoint of :func:`thermalize_exact` on observables.

    The generator is self-adjoint under the trace inner product, so the
    adjoint of the RK4 propagation is the same RK4 polynomial applied to the
    observable (without trace renormalization, whose effect is
    roundoff-sized). Satisfies tr[Th(rho) X] = tr[rho Th*(X)] to integrator
    accuracy.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    sp = _space_of(x, space)
    h = p.gamma * p.dt / steps
    mat = np.array(_as_matrix(x))
    for _ in range(steps):
        k1 = lindblad_adjoint(mat, sp)
        k2 = lindblad_adjoint(mat + 0.5 * h * k1, sp)
        k3 = lindblad_adjoint(mat + 0.5 * h * k2, sp)
        k4 = lindblad_adjoint(mat + h * k3, sp)
        mat = mat + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return mat


def additive_noise_channel(
    rho: DensityMatrix, delta_e: float, grid: QuadratureGrid
) -> DensityMatrix:
    """Gaussian random-displacement channel sum_k w_k D(mu_k) rho D(mu_k)^dagger.

    ``grid`` must have been built for this ``delta_e`` (checked through its
    weighted mean energy). The output trace is renormalized; the
    renormalization factor is logged and must stay within ``tail_tol`` of 1,
    else :class:`TruncationBreach` is raised.
    """
    if delta_e < 0:
        raise ValueError("delta_e must be >= 0")
    if abs(grid.mean_energy - delta_e) > 1e-10 * max(1.0, delta_e):
        raise ValueError(
            f"grid mean energy {grid.mean_energy:.6g} does not match delta_e={delta_e:.6g}"
        )
    if delta_e == 0.0:
        return rho
    sp = rho.space
    out = np.zeros_like(rho.entries)
    for mu, w in grid.nodes:
        d_op = displacement(mu, sp)
        out += w * (d_op @ rho.entries @ d_op.conj().T)
    tr = out.trace().real
    log.debug("additive_noise_channel renormalization factor %.17g", 1.0 / tr)
    if abs(tr - 1.0) > sp.tail_tol:
        raise TruncationBreach(
            f"renormalization factor deviates by {abs(tr - 1.0):.3e} > tail_tol="
            f"{sp.tail_tol:.1e}; increase dim or shrink delta_e"
        )
    out /= tr
    return _finalize_state(out, sp, "additive_noise_channel")
