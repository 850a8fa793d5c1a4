"""Particle density matrix in position representation, three ways.

Gamma(x, x', t) = <t| psi~^dag(x,t) psi~(x',t) |t> with the wave operator
psi(x,t) = sum_k a_k e^{ikx - i eps_k t} is evaluated exactly (from the
residual-propagated state), in first approximation (|t> frozen to |0,k0)),
and in the closed form

    Gamma(x,x',0) = e^{-i k0 (x-x')} exp{ i Phi(x) - i Phi(x')
                    - [|alpha(x,0)|^2 + |alpha(x',0)|^2 - 2 alpha*(x,0) alpha(x',0)]/2 }

built from alpha(x,t) = sum_q h_q(t) e^{-iqx} and the accumulated phase
Phi(x) = int Im[alphadot* alpha] dt'.

Cross-method agreement is exact only at positions commensurate with the
lattice (multiples of length/sites): momentum wrap-around otherwise breaks
the plane-wave contraction identity the closed form rests on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import ZeroOrderSolution
from .ecs import coherent_state_vector
from .hilbert import Lattice, Model, fidelity, make_basis_state


@dataclass(frozen=True)
class PositionGrid:
    """Ordered positions on the ring [0, length)."""

    points: np.ndarray
    length: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("need at least 2 position points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("positions must be strictly increasing")
        if pts[0] < 0 or pts[-1] >= self.length:
            raise ValueError("positions must lie in [0, length)")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, lattice: Lattice, count: int | None = None) -> "PositionGrid":
        """`count` equally spaced points from 0; commensurate with the lattice
        when count divides the number of sites (the default count is the
        number of sites)."""
        n = lattice.sites if count is None else int(count)
        return cls(points=np.arange(n) * (lattice.length / n), length=lattice.length)

    @property
    def size(self) -> int:
        return int(self.points.size)

    def is_commensurate(self, lattice: Lattice) -> bool:
        ratio = self.points / lattice.spacing
        return bool(np.allclose(ratio, np.round(ratio), atol=1e-9))


@dataclass(frozen=True)
class GammaGrid:
    """Density matrix sampled on a position grid."""

    values: np.ndarray
    grid: PositionGrid
    method: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.size, self.grid.size):
            raise ValueError("values must be square on the grid")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def hermiticity_error(self) -> float:
        return float(np.abs(self.values - self.values.conj().T).max())

    def diagonal_error(self) -> float:
        """Deviation of the diagonal from real non-negative values."""
        d = np.diag(self.values)
        return float(max(np.abs(d.imag).max(), np.maximum(-d.real, 0.0).max()))

    def trace_mean(self) -> float:
        """Ring average of the diagonal; equals the particle number 1 for the
        exact method on a full commensurate grid."""
        return float(np.mean(np.diag(self.values).real))

    def max_deviation(self, other: "GammaGrid") -> float:
        return float(np.abs(self.values - other.values).max())


def _wave_contraction_matrix(model: Model, points: np.ndarray, t: float) -> np.ndarray:
    """Rows apply sum_k e^{i k x - i eps_k t} a_k for each position x."""
    k = model.lattice.momenta
    eps = model.energies()
    return np.exp(1j * np.outer(points, k) - 1j * eps * t)


def _gamma_from_product_state(model: Model, state: np.ndarray,
                              grid: PositionGrid, t: float, method: str) -> GammaGrid:
    psi = _wave_contraction_matrix(model, grid.points, t) @ state  # (nx, levels)
    return GammaGrid(values=psi.conj() @ psi.T, grid=grid, method=method)


def _grid_step(sol: ZeroOrderSolution, t: float | None) -> tuple[int, float]:
    times = sol.grid.times
    tt = times[-1] if t is None else float(t)
    idx = int(np.argmin(np.abs(times - tt)))
    if abs(times[idx] - tt) > 1e-9 * max(1.0, abs(tt)):
        raise ValueError(f"time {tt} not on the propagation grid")
    return idx, times[idx]


def gamma_exact(state_tilde: np.ndarray, sol: ZeroOrderSolution,
                grid: PositionGrid, t: float | None = None) -> GammaGrid:
    """Exact density matrix from the rotated-frame state at a grid time."""
    model = sol.model
    if state_tilde.shape != model.shape:
        raise ValueError("state incompatible with the model")
    step, tt = _grid_step(sol, t)
    physical = (sol.u0(step) @ state_tilde.reshape(-1)).reshape(model.shape)
    return _gamma_from_product_state(model, physical, grid, tt, "exact")


def gamma_first_approx(sol: ZeroOrderSolution, grid: PositionGrid) -> GammaGrid:
    """First approximation: the rotated-frame state frozen to |0, k0).
    Requires a solution ending at t = 0 (started at t0 < 0)."""
    _require_t_end_zero(sol)
    state = make_basis_state(sol.model, sol.k0, 0)
    step, tt = _grid_step(sol, None)
    physical = (sol.u0(step) @ state.reshape(-1)).reshape(sol.model.shape)
    return _gamma_from_product_state(sol.model, physical, grid, tt, "first_approx")


def _require_t_end_zero(sol: ZeroOrderSolution) -> None:
    if abs(sol.grid.t_end) > 1e-12 or sol.grid.t0 >= 0:
        raise ValueError("density-matrix approximations are defined at t = 0 "
                         "with the interaction switched on at t0 < 0")


@dataclass(frozen=True)
class AlphaField:
    """alpha(x, t) on the stored grid times and the accumulated phase Phi(x)."""

    model: Model
    grid: PositionGrid
    times: np.ndarray
    alpha: np.ndarray   # (n_times, n_points)
    phi: np.ndarray     # (n_points,)

    @property
    def alpha_final(self) -> np.ndarray:
        return self.alpha[-1]

    def phi_spread(self) -> float:
        return float(self.phi.max() - self.phi.min())


def alpha_values(sol: ZeroOrderSolution, points: np.ndarray,
                 half_index: int | None = None,
                 h_values: np.ndarray | None = None) -> np.ndarray:
    """alpha(x, t) = sum_q h_q(t) e^{-iqx} at raw positions (no grid
    validation); periodic in x with the ring length."""
    if h_values is None:
        h_values = sol.h_half[half_index]
    qvals = np.array([sol.model.lattice.offset_momentum(q) for q in sol.offsets])
    phases = np.exp(-1j * np.outer(np.asarray(points, dtype=float), qvals))
    return phases @ h_values


def _alpha_phi_at(sol: ZeroOrderSolution, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(alpha on the half grid, Phi) at raw positions: alpha from the stored
    h_q(t), Phi by trapezoid of Im[alphadot* alpha] with alphadot analytic."""
    qvals = np.array([sol.model.lattice.offset_momentum(q) for q in sol.offsets])
    phases = np.exp(-1j * np.outer(np.asarray(points, dtype=float), qvals))  # (nx, nq)
    alpha_half = sol.h_half @ phases.T                                       # (n_half, nx)
    alphadot_half = sol.hdot_half @ phases.T
    integrand = np.imag(alphadot_half.conj() * alpha_half)
    dt_half = sol.grid.dt / 2.0
    phi = 0.5 * dt_half * (integrand[0] + integrand[-1]) + dt_half * integrand[1:-1].sum(axis=0)
    return alpha_half, phi


def alpha_phi(sol: ZeroOrderSolution, grid: PositionGrid) -> AlphaField:
    """Evaluate alpha on the grid at all stored times and accumulate
    Phi(x) = int_{t0}^{0} Im[alphadot*(x,t') alpha(x,t')] dt'."""
    _require_t_end_zero(sol)
    alpha_half, phi = _alpha_phi_at(sol, grid.points)
    return AlphaField(model=sol.model, grid=grid, times=sol.grid.times,
                      alpha=alpha_half[::2], phi=phi)


def gamma_closed_form(field: AlphaField, k0: int, grid: PositionGrid) -> GammaGrid:
    """Closed-form density matrix at t = 0 from alpha(x,0) and Phi(x)."""
    if grid.size != field.grid.size or not np.allclose(grid.points, field.grid.points):
        raise ValueError("field was evaluated on a different grid")
    k0_val = field.model.lattice.momenta[int(k0)]
    a0 = field.alpha_final
    x = grid.points
    exponent = (-1j * k0_val * (x[:, None] - x[None, :])
                + 1j * (field.phi[:, None] - field.phi[None, :])
                - 0.5 * (np.abs(a0[:, None]) ** 2 + np.abs(a0[None, :]) ** 2
                         - 2.0 * a0.conj()[:, None] * a0[None, :]))
    return GammaGrid(values=np.exp(exponent), grid=grid, method="closed_form")


class IntermediateStateCheck(NamedTuple):
    fidelity: float
    contracted: np.ndarray
    analytic: np.ndarray


def intermediate_state_check(sol: ZeroOrderSolution, x_prime: float) -> IntermediateStateCheck:
    """Compare psi(x',0) U0(0)|0,k0) with
    e^{i k0 x' - i Phi(x')} |alpha(x',0)) in the oscillator sector."""
    _require_t_end_zero(sol)
    model = sol.model
    step = sol.grid.steps
    physical = sol.zero_order_state(step)
    row = _wave_contraction_matrix(model, np.array([float(x_prime)]), 0.0)
    contracted = (row @ physical)[0]

    alpha_half, phi_arr = _alpha_phi_at(sol, np.array([float(x_prime)]))
    alpha0 = complex(alpha_half[-1, 0])
    phi = float(phi_arr[0])
    k0_val = model.lattice.momenta[sol.k0]
    analytic = np.exp(1j * k0_val * x_prime - 1j * phi) \
        * coherent_state_vector(alpha0, model.osc.levels)
    return IntermediateStateCheck(fidelity=fidelity(contracted, analytic),
                                  contracted=contracted, analytic=analytic)
