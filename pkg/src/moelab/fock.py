"""Truncated Fock-space linear algebra.

Ladder operators, displacement unitaries, thermal and random states, and the
entropy/energy functionals they feed. Everything is embedded in a single
working dimension ``d``; states are expected to keep their population at the
top level below ``FockSpace.tail_tol`` so truncation error stays observable.

All types are immutable values and all operations are pure functions;
randomness enters only through explicit seeds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    BoundaryState,
    NonPhysicalState,
    TruncationWarning,
    UnreachableTarget,
)

# Eigenvalues below RANK_FLOOR are indistinguishable from eigensolver noise
# for generic dense states and are treated as the boundary. Populations of
# exactly diagonal states are data, not eigensolver output, so for those the
# boundary test is positivity itself.
RANK_FLOOR = 1e-12

HERM_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-12

__all__ = [
    "RANK_FLOOR",
    "FockSpace",
    "ThermalSpec",
    "DensityMatrix",
    "annihilation",
    "creation",
    "number_operator",
    "identity",
    "displacement",
    "thermal_state",
    "maximally_mixed",
    "number_state",
    "vacuum_state",
    "von_neumann_entropy",
    "energy",
    "entropy_rate",
    "random_density_matrix",
    "set_entropy",
    "embed",
    "trace_distance",
]


@dataclass(frozen=True)
class FockSpace:
    """Fock space truncated to levels ``0 .. dim-1``.

    Parameters
    ----------
    dim : int
        Working dimension, at least 2.
    tail_tol : float
        Maximum admissible population at the top level ``dim-1``; also the
        threshold for truncation-leakage diagnostics.
    """

    dim: int
    tail_tol: float = 1e-10

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if not self.tail_tol > 0:
            raise ValueError(f"tail_tol must be > 0, got {self.tail_tol}")


@dataclass(frozen=True)
class ThermalSpec:
    """Inverse temperature (hbar*omega = 1) plus the space to truncate to.

    ``beta = inf`` is allowed and yields the vacuum projector. ``beta <= 0``
    is rejected; the maximally mixed limit is exposed separately through
    :func:`maximally_mixed` because the untruncated ``beta -> 0`` state does
    not exist.
    """

    beta: float
    space: FockSpace

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0 (or inf), got {self.beta}")

    @property
    def mean_occupation(self) -> float:
        """Untruncated mean photon number 1/(e^beta - 1)."""
        if math.isinf(self.beta):
            return 0.0
        return 1.0 / math.expm1(self.beta)


class DensityMatrix:
    """Hermitian, positive-semidefinite, unit-trace matrix on a FockSpace.

    Instances are immutable; ``entries`` is a read-only array. Construction
    validates Hermiticity and trace to 1e-12 and the smallest eigenvalue
    down to -1e-12.
    """

    __slots__ = ("space", "entries")

    def __init__(self, space: FockSpace, entries: np.ndarray):
        mat = np.array(entries, dtype=complex)
        d = space.dim
        if mat.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix, got {mat.shape}")
        herm_defect = np.max(np.abs(mat - mat.conj().T))
        if herm_defect > HERM_TOL:
            raise NonPhysicalState(f"Hermiticity defect {herm_defect:.3e} > {HERM_TOL}")
        tr = mat.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise NonPhysicalState(f"trace defect {abs(tr - 1.0):.3e} > {TRACE_TOL}")
        lo = float(np.linalg.eigvalsh(mat)[0])
        if lo < PSD_TOL:
            raise NonPhysicalState(f"smallest eigenvalue {lo:.3e} < {PSD_TOL}")
        mat.flags.writeable = False
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "entries", mat)

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    @property
    def dim(self) -> int:
        return self.space.dim

    def tail_population(self) -> float:
        """Population at the top level, the truncation diagnostic."""
        return float(self.entries[-1, -1].real)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, tail={self.tail_population():.2e})"


# ---------------------------------------------------------------------------
# operators


@lru_cache(maxsize=None)
def annihilation(space: FockSpace) -> np.ndarray:
    """Annihilation operator: a[n-1, n] = sqrt(n)."""
    d = space.dim
    a = np.zeros((d, d), dtype=complex)
    ns = np.arange(1, d)
    a[ns - 1, ns] = np.sqrt(ns)
    a.flags.writeable = False
    return a


@lru_cache(maxsize=None)
def creation(space: FockSpace) -> np.ndarray:
    """Creation operator, the conjugate transpose of :func:`annihilation`."""
    adag = annihilation(space).conj().T.copy()
    adag.flags.writeable = False
    return adag


@lru_cache(maxsize=None)
def number_operator(space: FockSpace) -> np.ndarray:
    """Number operator a^dagger a = diag(0, 1, ..., d-1)."""
    n = np.diag(np.arange(space.dim, dtype=complex))
    n.flags.writeable = False
    return n


@lru_cache(maxsize=None)
def identity(space: FockSpace) -> np.ndarray:
    eye = np.eye(space.dim, dtype=complex)
    eye.flags.writeable = False
    return eye


def displacement(mu: complex, space: FockSpace) -> np.ndarray:
    """Displacement unitary exp(mu a^dagger - conj(mu) a).

    Computed by eigendecomposing the Hermitian matrix -i(mu a^dagger -
    conj(mu) a) and exponentiating its eigenvalues, so the result is unitary
    up to eigensolver error plus truncation leakage. Emits a
    :class:`TruncationWarning` when the unitarity defect exceeds
    ``space.tail_tol``; keep ``|mu|^2`` well below ``dim``.
    """
    a = annihilation(space)
    gen = mu * a.conj().T - np.conj(mu) * a
    h = -1j * gen
    vals, vecs = np.linalg.eigh(h)
    disp = (vecs * np.exp(1j * vals)) @ vecs.conj().T
    defect = np.linalg.norm(disp.conj().T @ disp - identity(space))
    if defect > space.tail_tol:
        warnings.warn(
            f"displacement(mu={mu}) unitarity defect {defect:.3e} exceeds "
            f"tail_tol={space.tail_tol:.1e}; increase dim",
            TruncationWarning,
            stacklevel=2,
        )
    return disp


# ---------------------------------------------------------------------------
# states


def thermal_state(spec: ThermalSpec) -> DensityMatrix:
    """Truncated thermal state with populations exp(-beta n) / Z_d.

    The partition sum is the truncated one, so the trace is exactly 1 at
    finite ``d``. ``beta = inf`` yields the vacuum projector.
    """
    d = spec.space.dim
    if math.isinf(spec.beta):
        return number_state(spec.space, 0)
    pops = np.exp(-spec.beta * np.arange(d))
    pops /= pops.sum()
    return DensityMatrix(spec.space, np.diag(pops.astype(complex)))


def maximally_mixed(space: FockSpace) -> DensityMatrix:
    """The beta -> 0 limit on the truncated space: I / d."""
    return DensityMatrix(space, np.eye(space.dim, dtype=complex) / space.dim)


def number_state(space: FockSpace, n: int) -> DensityMatrix:
    """Projector onto the number state |n>."""
    if not 0 <= n < space.dim:
        raise ValueError(f"level {n} outside 0..{space.dim - 1}")
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    mat[n, n] = 1.0
    return DensityMatrix(space, mat)


def vacuum_state(space: FockSpace) -> DensityMatrix:
    return number_state(space, 0)


def random_density_matrix(seed: int, space: FockSpace, rank: int) -> DensityMatrix:
    """Reproducible random state G G^dagger / tr(G G^dagger), G complex Gaussian d x rank.

    Full-rank draws are resampled (at most 8 times) if the smallest
    eigenvalue lands below ``RANK_FLOOR``.
    """
    d = space.dim
    if not 1 <= rank <= d:
        raise ValueError(f"rank must be in 1..{d}, got {rank}")
    rng = np.random.default_rng(seed)
    for _ in range(8):
        g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
        mat = g @ g.conj().T
        mat /= mat.trace().real
        mat = 0.5 * (mat + mat.conj().T)
        if rank < d or np.linalg.eigvalsh(mat)[0] >= RANK_FLOOR:
            return DensityMatrix(space, mat)
    raise RuntimeError("could not draw a full-rank state above RANK_FLOOR")


def embed(rho: DensityMatrix, space: FockSpace) -> DensityMatrix:
    """Zero-pad a state into a larger space (identical low-level content)."""
    if space.dim < rho.dim:
        raise ValueError("target space is smaller than the state's space")
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    mat[: rho.dim, : rho.dim] = rho.entries
    return DensityMatrix(space, mat)


# ---------------------------------------------------------------------------
# spectra and functionals


def _eigensystem(rho: DensityMatrix):
    """Eigenvalues (ascending) and eigenvectors; exact fast path for diagonal states.

    Returns ``(vals, vecs, is_diagonal)``. For exactly diagonal matrices the
    populations are returned as data, bypassing eigensolver noise.
    """
    mat = rho.entries
    off = mat - np.diag(np.diag(mat))
    if not off.any():
        diag = mat.diagonal().real
        order = np.argsort(diag)
        vecs = np.eye(rho.dim, dtype=complex)[:, order]
        return diag[order].copy(), vecs, True
    vals, vecs = np.linalg.eigh(mat)
    return vals, vecs, False


def _require_full_rank(rho: DensityMatrix, rank_floor: float | None, op: str):
    """Boundary gate shared by all logarithm-requiring operations.

    Generic states are gated at ``rank_floor``; exactly diagonal states are
    gated only at positivity, since their populations carry no eigensolver
    noise (truncated thermal tails are routinely far below 1e-12 and still
    exactly representable). ``rank_floor=None`` skips the gate (internal
    callers that floor spectra themselves).
    """
    vals, vecs, diag = _eigensystem(rho)
    if rank_floor is not None:
        floor = 0.0 if diag else rank_floor
        if vals[0] < floor or (diag and vals[0] <= 0.0):
            raise BoundaryState(
                f"{op}: smallest eigenvalue {vals[0]:.3e} is below the rank floor; "
                "the state sits on the boundary"
            )
    return vals, vecs


def _log_psd(vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    return (vecs * np.log(vals)) @ vecs.conj().T


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S(rho) = -tr rho ln rho in nats, with the 0 ln 0 = 0 convention.

    Eigenvalues in [-1e-12, 0] are clamped to zero; anything below -1e-12
    raises :class:`NonPhysicalState`.
    """
    vals, _, _ = _eigensystem(rho)
    if vals[0] < PSD_TOL:
        raise NonPhysicalState(f"eigenvalue {vals[0]:.3e} < {PSD_TOL}")
    vals = np.clip(vals, 0.0, None)
    pos = vals[vals > 0.0]
    return float(-(pos * np.log(pos)).sum())


def energy(rho: DensityMatrix) -> float:
    """Mean photon number tr(rho a^dagger a)."""
    return float(np.sum(np.diag(rho.entries).real * np.arange(rho.dim)))


def entropy_rate(rho: DensityMatrix, gamma: float, rank_floor: float = RANK_FLOOR) -> float:
    """Instantaneous entropy production -gamma tr[N(rho) ln rho] (nats per unit time).

    ``N`` is the photon add/subtract generator (see :mod:`moelab.channel`).
    Diverges on the boundary: rank-deficient input raises
    :class:`BoundaryState`. For thermal input the rate equals gamma * beta up
    to the truncated-tail correction.
    """
    vals, vecs = _require_full_rank(rho, rank_floor, "entropy_rate")
    log_rho = _log_psd(vals, vecs)
    gen = _photon_exchange_generator(rho.entries, rho.space)
    return float(-gamma * np.trace(gen @ log_rho).real)


def set_entropy(
    rho: DensityMatrix, target: float, rank_floor: float | None = RANK_FLOOR
) -> DensityMatrix:
    """Retract onto the entropy shell: rho^s / tr(rho^s) with S = target +- 1e-10.

    The exponent ``s > 0`` is found by bisection; eigenvectors are unchanged.
    ``target`` must lie strictly inside (0, ln d).
    """
    d = rho.dim
    if not 0.0 < target < math.log(d):
        raise UnreachableTarget(f"target {target} outside (0, ln {d}) = (0, {math.log(d):.6f})")
    vals, vecs = _require_full_rank(rho, rank_floor, "set_entropy")
    log_vals = np.log(np.clip(vals, 1e-300, None))

    def entropy_at(s: float) -> float:
        w = s * log_vals
        w = np.exp(w - w.max())
        p = w / w.sum()
        pos = p[p > 0.0]
        return float(-(pos * np.log(pos)).sum())

    if abs(entropy_at(1.0) - target) <= 1e-10:
        return rho
    lo, hi = 0.0, 1.0
    # S(s) is strictly decreasing for non-uniform spectra; expand the bracket
    # upward until it straddles the target.
    while entropy_at(hi) > target:
        lo, hi = hi, hi * 2.0
        if hi > 2.0**60:
            raise UnreachableTarget(f"target {target} not reachable by spectral powers")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s_mid = entropy_at(mid)
        if abs(s_mid - target) <= 1e-10:
            lo = hi = mid
            break
        if s_mid > target:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    w = s * log_vals
    w = np.exp(w - w.max())
    p = w / w.sum()
    mat = (vecs * p) @ vecs.conj().T
    mat = 0.5 * (mat + mat.conj().T)
    return DensityMatrix(rho.space, mat)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(1/2) tr |rho - sigma|."""
    diff = rho.entries - sigma.entries
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


# ---------------------------------------------------------------------------
# generator core (shared with moelab.channel, which owns the public maps)


@lru_cache(maxsize=None)
def _ladder_anticommutator(space: FockSpace) -> np.ndarray:
    """a+a + a a+, the diagonal weight of the generator's anticommutator part."""
    a = annihilation(space)
    adag = creation(space)
    m = adag @ a + a @ adag
    m.flags.writeable = False
    return m


def _photon_exchange_generator(mat: np.ndarray, space: FockSpace) -> np.ndarray:
    """(1/2)(2 a X a+ - a+a X - X a+a + 2 a+ X a - a a+ X - X a a+)."""
    a = annihilation(space)
    adag = creation(space)
    lower = a @ mat @ adag
    raise_ = adag @ mat @ a
    m = _ladder_anticommutator(space)
    return lower + raise_ - 0.5 * (m @ mat + mat @ m)
