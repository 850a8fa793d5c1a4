"""Extended coherent states and their algebraic properties.

An extended coherent state replaces the scalar displacement amplitude of an
ordinary oscillator coherent state by the particle operator
Q = sum_q h_q rho_q (a commuting family on the periodic lattice), entangling
the particle with the oscillator:

    |h, k0> = exp(-Q^dag Q / 2) sum_n (Q b^dag)^n / n!  |0, k0)
            = exp(Q b^dag - Q^dag b) |0, k0)

Both constructions are provided, together with numerical checks of the
annihilation action b|h,k0> = Q|h,k0>, momentum-shift relations, the overlap
formula for single-mode coefficient sets, a quadrature test of the resolution
of unity, and the plane-wave contraction sum rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm
from scipy.special import gammainc, roots_laguerre

from .hilbert import (
    CoefficientSet,
    Model,
    fidelity,
    inner,
    make_basis_state,
    oscillator_annihilation,
    shift_matrix,
    state_norm,
)

TRUNCATION_TOL = 1e-10


class TruncationError(ValueError):
    """Coefficient amplitude too large for the configured Fock cutoff."""


def coherent_state_vector(alpha: complex, levels: int) -> np.ndarray:
    """Ordinary (Schroedinger) coherent state amplitudes on levels 0..levels-1:
    exp(-|alpha|^2/2) alpha^n / sqrt(n!)."""
    n = np.arange(levels)
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, levels)))))
    amps = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * log_fact) * alpha ** n
    return amps.astype(complex)


def coherent_truncation_tail(amplitude_sq: float, cutoff: int) -> float:
    """Poisson weight beyond the Fock cutoff for mean `amplitude_sq`."""
    return float(gammainc(cutoff + 1, amplitude_sq))


def _check_truncation(model: Model, h: CoefficientSet, tol: float) -> None:
    amp = h.operator_amplitude()
    if amp ** 2 > model.osc.cutoff / 4.0:
        raise TruncationError(
            f"amplitude^2 = {amp ** 2:.3g} exceeds cutoff/4 = {model.osc.cutoff / 4.0:.3g}; "
            "raise the Fock cutoff or scale down the coefficients")
    tail = coherent_truncation_tail(amp ** 2, model.osc.cutoff)
    if tail >= tol:
        raise TruncationError(
            f"coherent tail beyond the cutoff is {tail:.3g} >= tolerance {tol:.3g}")


def _hermitian_function(mat: np.ndarray, fn) -> np.ndarray:
    """Matrix function of a Hermitian matrix via eigendecomposition."""
    w, v = np.linalg.eigh(mat)
    return (v * fn(w)) @ v.conj().T


def _series_state(model: Model, h: CoefficientSet, k0: int, order_cap: int) -> np.ndarray:
    """exp(-Q^dag Q/2) sum_{n<=order_cap} (Q b^dag)^n/n! |0,k0), no amplitude guard.

    Fock amplitudes at levels <= order_cap are exact under truncation: each
    series term lands on a single level and the prefactor acts on the particle
    factor only.
    """
    qp = h.particle_matrix()
    bdag = oscillator_annihilation(model.osc).conj().T
    term = make_basis_state(model, k0, 0)
    acc = term.copy()
    for n in range(1, order_cap + 1):
        term = (qp @ term @ bdag.T) / n
        acc += term
    pref = _hermitian_function(qp.conj().T @ qp, lambda w: np.exp(-0.5 * w))
    return pref @ acc


@dataclass(frozen=True)
class EcsState:
    """An extended coherent state together with its defining data."""

    model: Model
    h: CoefficientSet
    k0: int
    construction: str
    state: np.ndarray

    def __post_init__(self):
        self.state.flags.writeable = False

    @property
    def norm(self) -> float:
        return state_norm(self.state)


def _finish(model, h, k0, construction, state, tol) -> EcsState:
    norm = state_norm(state)
    if abs(norm - 1.0) > 100.0 * tol:
        raise TruncationError(
            f"constructed state norm {norm} deviates from 1 beyond tolerance")
    return EcsState(model=model, h=h, k0=k0, construction=construction, state=state)


def ecs_series(model: Model, h: CoefficientSet, k0: int,
               order_cap: int | None = None, tol: float = TRUNCATION_TOL) -> EcsState:
    """Series construction of the extended coherent state.

    `order_cap` bounds the displacement series (default: the Fock cutoff);
    values above the cutoff would spill past truncation and are rejected.
    The normalization prefactor is applied after the series; its placement
    is immaterial because all particle factors involved commute.
    """
    if order_cap is None:
        order_cap = model.osc.cutoff
    if order_cap > model.osc.cutoff:
        raise ValueError(
            f"order_cap {order_cap} exceeds Fock cutoff {model.osc.cutoff}")
    if not 0 <= int(k0) < model.lattice.sites:
        raise ValueError(f"momentum index {k0} out of range")
    _check_truncation(model, h, tol)
    state = _series_state(model, h, k0, order_cap)
    return _finish(model, h, k0, "series", state, tol)


def ecs_displacement(model: Model, h: CoefficientSet, k0: int,
                     tol: float = TRUNCATION_TOL) -> EcsState:
    """Displacement construction exp(Q b^dag - Q^dag b)|0,k0) by dense matrix
    exponential of the anti-Hermitian generator."""
    if not 0 <= int(k0) < model.lattice.sites:
        raise ValueError(f"momentum index {k0} out of range")
    _check_truncation(model, h, tol)
    qp = h.particle_matrix()
    b = oscillator_annihilation(model.osc)
    gen = np.kron(qp, b.conj().T) - np.kron(qp.conj().T, b)
    state = (expm(gen) @ make_basis_state(model, k0, 0).reshape(-1)).reshape(model.shape)
    return _finish(model, h, k0, "displacement", state, tol)


def check_b_action(ecs: EcsState) -> float:
    """Residual ||b|h,k0> - Q|h,k0>||; vanishes at infinite cutoff."""
    b = oscillator_annihilation(ecs.model.osc)
    qp = ecs.h.particle_matrix()
    lhs = ecs.state @ b.T
    rhs = qp @ ecs.state
    return float(np.linalg.norm(lhs - rhs))


def overlap(ecs1: EcsState, ecs2: EcsState) -> complex:
    """<ecs1|ecs2> on a common model."""
    if ecs1.model.shape != ecs2.model.shape:
        raise ValueError("states live on different spaces")
    return inner(ecs1.state, ecs2.state)


def overlap_single_mode(g: complex, g_prime: complex, k0: int, k0_prime: int) -> complex:
    """Closed-form overlap of two single-mode states sharing the mode offset:
    exp(-(|g|^2 + |g'|^2 - 2 g* g')/2) * delta(k0 - k0')."""
    if k0 != k0_prime:
        return 0.0
    return complex(np.exp(-0.5 * (abs(g) ** 2 + abs(g_prime) ** 2
                                  - 2.0 * np.conj(g) * g_prime)))


def momentum_shift_check(ecs: EcsState, q: int) -> float:
    """max(||rho_q|h,k0> - |h,k0-q>||, ||rho_q^dag rho_q|h,k0> - |h,k0>||).

    Exact on the periodic lattice: rho_q acts on the particle factor only.
    """
    model = ecs.model
    sq = shift_matrix(model.lattice, q)
    shifted = sq @ ecs.state
    k_target = model.lattice.shift_index(ecs.k0, -model.lattice.wrap_offset(q))
    rebuilt = _series_state(model, ecs.h, k_target, model.osc.cutoff) \
        if ecs.construction == "series" else ecs_displacement(model, ecs.h, k_target).state
    r1 = np.linalg.norm(shifted - rebuilt)
    r2 = np.linalg.norm(sq.conj().T @ shifted - ecs.state)
    return float(max(r1, r2))


class SumRuleResult(NamedTuple):
    alpha: complex
    contracted: np.ndarray
    analytic: np.ndarray
    fidelity: float


def contract_to_oscillator(model: Model, state: np.ndarray, s: float, t: float = 0.0) -> np.ndarray:
    """Apply sum_k exp(i s k - i eps_k t) a_k: the one-particle sector collapses
    to the particle vacuum and an oscillator-space vector remains."""
    phases = np.exp(1j * s * model.lattice.momenta - 1j * model.energies() * t)
    return phases @ state


def sum_rule(ecs: EcsState, s: float) -> SumRuleResult:
    """Contract the state with sum_k e^{isk} a_k and compare against the
    coherent state e^{i s k0} |alpha), alpha = sum_q h_q e^{-isq}.

    The identity is exact for positions s commensurate with the lattice
    (integer multiples of lattice.spacing); elsewhere momentum wrap-around
    makes the canonical-representative phases disagree.
    """
    model = ecs.model
    contracted = contract_to_oscillator(model, ecs.state, s)
    alpha = sum(v * np.exp(-1j * s * model.lattice.offset_momentum(q))
                for q, v in ecs.h.items)
    alpha = complex(alpha)
    k0_val = model.lattice.momenta[ecs.k0]
    analytic = np.exp(1j * s * k0_val) * coherent_state_vector(alpha, model.osc.levels)
    return SumRuleResult(alpha=alpha, contracted=contracted, analytic=analytic,
                         fidelity=fidelity(contracted, analytic))


def _polar_nodes(radial_nodes: int, angular_nodes: int, scale: float):
    """Quadrature for (1/pi) * int d^2 z, with the radial direction mapped to
    Gauss-Laguerre nodes in u = |z|^2 * scale.  Returns (radii, angles,
    weights) where weights absorb the 1/pi and the Laguerre weight
    compensation e^{+u} (the integrand must supply its own Gaussian decay).
    """
    if radial_nodes < 1 or angular_nodes < 1:
        raise ValueError("node counts must be positive")
    u, w = roots_laguerre(radial_nodes)
    radii = np.sqrt(u / scale)
    radial_weights = w * np.exp(u) / (2.0 * scale)
    angles = 2.0 * np.pi * np.arange(angular_nodes) / angular_nodes
    weights = radial_weights * (2.0 * np.pi / angular_nodes) / np.pi
    return radii, angles, weights


class UnityResolutionResult(NamedTuple):
    deviation: float
    reliable_levels: tuple[int, ...]
    matrix: np.ndarray


def unity_resolution_check(model: Model, h: CoefficientSet,
                           radial_nodes: int = 40, angular_nodes: int = 64,
                           tol: float = TRUNCATION_TOL) -> UnityResolutionResult:
    """Quadrature test of sum_k (1/pi) int d^2z  Q |zh,k><zh,k| Q^dag = 1.

    Polar quadrature: Gauss-Laguerre radially (in u = |z|^2 scaled by the
    smallest nonzero eigenbranch of Q^dag Q, so the slowest Gaussian decay is
    matched), uniform angularly.  The deviation from the identity is measured
    on the reliable subspace: Fock levels whose coherent occupancy at the
    largest quadrature radius stays below `tol`, since states at large |z|
    spill past the cutoff.  Scaled series states are built internally without
    the amplitude guard; their amplitudes at retained levels are exact.
    """
    qp = h.particle_matrix()
    lam_sq = np.linalg.eigvalsh(qp.conj().T @ qp)
    nonzero = lam_sq[lam_sq > 1e-14]
    if nonzero.size == 0:
        raise ValueError("Q vanishes; the resolution of unity has no support")
    scale = float(nonzero.min())
    radii, angles, weights = _polar_nodes(radial_nodes, angular_nodes, scale)

    N, levels = model.shape
    dim = model.dim
    n_arr = np.arange(levels)
    # Series core: column n of `core` is Q^n |k=0> / sqrt(n!) on the particle
    # factor; the state at z is exp(-|z|^2 Q^dag Q / 2) . (z^n * core).
    core = np.zeros((N, levels), dtype=complex)
    vec = np.zeros(N, dtype=complex)
    vec[0] = 1.0
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, levels)))))
    for n in range(levels):
        core[:, n] = vec * np.exp(-0.5 * log_fact[n])
        vec = qp @ vec
    w_eig, v_eig = np.linalg.eigh(qp.conj().T @ qp)

    result = np.zeros((dim, dim), dtype=complex)
    rolls = [np.arange(N)]
    for k in range(1, N):
        rolls.append(np.roll(rolls[0], k))
    for r, wgt in zip(radii, weights):
        pref = (v_eig * np.exp(-0.5 * r ** 2 * w_eig)) @ v_eig.conj().T
        z = r * np.exp(1j * angles)
        zpow = z[:, None] ** n_arr[None, :]
        states = np.einsum("ij,jl,al->ail", pref, core, zpow)  # (angle, N, levels)
        states = np.einsum("ij,ajl->ail", qp, states)
        # all N momentum shifts of each state, flattened into rows
        stacked = states[:, rolls, :].reshape(angular_nodes * N, dim)
        sw = np.sqrt(wgt)
        stacked *= sw
        result += stacked.T @ stacked.conj()

    mu_max = float(radii.max() ** 2 * lam_sq.max())
    poisson = np.exp(-mu_max + n_arr * np.log(max(mu_max, 1e-300)) - log_fact)
    reliable = tuple(int(n) for n in n_arr[poisson < tol])
    if not reliable:
        return UnityResolutionResult(deviation=float("inf"), reliable_levels=(),
                                     matrix=result)
    idx = np.array([k * levels + n for k in range(N) for n in reliable])
    block = result[np.ix_(idx, idx)]
    deviation = float(np.linalg.norm(block - np.eye(idx.size), 2))
    return UnityResolutionResult(deviation=deviation, reliable_levels=reliable,
                                 matrix=result)


class MomentIdentityResult(NamedTuple):
    values: np.ndarray
    target: np.ndarray
    max_diagonal_error: float
    max_offdiagonal: float


def moment_identity_check(c: complex, max_order: int = 4,
                          radial_nodes: int = 40,
                          angular_nodes: int = 64) -> MomentIdentityResult:
    """Quadrature check of the scalar Gaussian moment integral

        int d^2z (z*)^n z^m exp(-|z|^2 |c|^2) c^{m+1} (c*)^{n+1} = pi n! delta_nm

    for n, m = 0..max_order, using the same polar quadrature as the
    resolution-of-unity test."""
    if abs(c) == 0.0:
        raise ValueError("c must be nonzero")
    scale = abs(c) ** 2
    radii, angles, weights = _polar_nodes(radial_nodes, angular_nodes, scale)
    orders = np.arange(max_order + 1)
    values = np.zeros((max_order + 1, max_order + 1), dtype=complex)
    for r, wgt in zip(radii, weights):
        z = r * np.exp(1j * angles)
        zp = z[:, None] ** orders[None, :]
        gauss = np.exp(-r ** 2 * scale)
        # values[n, m] += pi * wgt * sum_angles (z*)^n z^m * gauss * c^{m+1} c*^{n+1}
        values += np.pi * wgt * gauss * np.einsum("an,am->nm", zp.conj(), zp)
    values *= np.conj(c) ** (orders[:, None] + 1) * c ** (orders[None, :] + 1)
    fact = np.cumprod(np.concatenate(([1.0], np.arange(1, max_order + 1))))
    target = np.pi * np.diag(fact)
    diff = values - target
    diag_err = float(np.abs(np.diag(diff)).max())
    off = np.abs(diff - np.diag(np.diag(diff))).max() if max_order > 0 else 0.0
    return MomentIdentityResult(values=values, target=target,
                                max_diagonal_error=diag_err,
                                max_offdiagonal=float(off))
