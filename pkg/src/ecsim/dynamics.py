"""Interaction Hamiltonian, its integrable/residual split, and propagation.

The interaction-picture Hamiltonian b^dag e^{i w t} sum_q g_q rho_q(t) + h.c.
is split into an exactly solvable part H0 (operator phases replaced by a
unimodular modulator f_q(t)) and a residual H1.  H0 generates the evolution

    U0(t) = exp{ Q(t) b^dag - Q^dag(t) b - i chi(t) },
    h_q(t) = -i g_q int_{t0}^t f_q(t') e^{i w t'} dt',
    chi(t) = -(i/2) int_{t0}^t [ Qdot^dag Q - Q^dag Qdot ] dt',

assembled here from half-step trapezoid quadrature of h and chi.  The
residual is integrated in the rotated frame |t> = U0^dag(t)|t) with a
unitary midpoint-exponential stepper acting on H1 conjugated by U0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .hilbert import (
    CoefficientSet,
    Lattice,
    Model,
    ProductOperator,
    make_basis_state,
    oscillator_annihilation,
    shift_matrix,
)

STABILITY_LIMIT = 0.5


@dataclass(frozen=True)
class CouplingSet:
    """Coupling function q -> g_q of the particle-oscillator interaction.

    The physical constraint g_{-q} = g_q^* is validated by default; the
    closed-form density-matrix results for a strictly single-mode coupling
    with q0 != 0 require constructing with hermitian=False (the Hamiltonian
    itself stays Hermitian either way).
    """

    lattice: Lattice
    items: tuple[tuple[int, complex], ...]
    hermitian: bool = True

    def __post_init__(self):
        merged: dict[int, complex] = {}
        for q, v in self.items:
            qc = self.lattice.wrap_offset(q)
            merged[qc] = merged.get(qc, 0.0) + complex(v)
        object.__setattr__(self, "items", tuple(sorted(merged.items())))
        if self.hermitian:
            for q, v in self.items:
                partner = merged.get(self.lattice.wrap_offset(-q), 0.0)
                if abs(np.conj(v) - partner) > 1e-12 * max(1.0, abs(v)):
                    raise ValueError(
                        f"coupling constraint g_-q = g_q* violated at q={q}: "
                        f"g_q={v}, g_-q={partner}")

    @classmethod
    def from_dict(cls, lattice: Lattice, values, hermitian: bool = True) -> "CouplingSet":
        return cls(lattice, tuple((int(q), complex(v)) for q, v in values.items()),
                   hermitian=hermitian)

    @classmethod
    def hermitian_pair(cls, lattice: Lattice, q0: int, g: complex) -> "CouplingSet":
        """{q0: g, -q0: g*}; for q0 = 0 the coupling must be real."""
        if lattice.wrap_offset(q0) == lattice.wrap_offset(-q0):
            if abs(g.imag if isinstance(g, complex) else 0.0) > 1e-15:
                raise ValueError("self-paired offset requires a real coupling")
            return cls(lattice, ((q0, complex(g).real),))
        return cls(lattice, ((q0, complex(g)), (-q0, np.conj(complex(g)))))

    @classmethod
    def zero(cls, lattice: Lattice) -> "CouplingSet":
        return cls(lattice, ())

    def scaled(self, factor: float) -> "CouplingSet":
        """Scale all couplings by a real factor (preserves the constraint)."""
        return CouplingSet(self.lattice, tuple((q, factor * v) for q, v in self.items),
                           hermitian=self.hermitian)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.items)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.items], dtype=complex)

    @property
    def l1_amplitude(self) -> float:
        return float(sum(abs(v) for _, v in self.items))

    def particle_matrix(self) -> np.ndarray:
        N = self.lattice.sites
        mat = np.zeros((N, N), dtype=complex)
        for q, v in self.items:
            mat += v * shift_matrix(self.lattice, q)
        return mat

    def as_coefficients(self) -> CoefficientSet:
        return CoefficientSet(self.lattice, self.items)


@dataclass(frozen=True)
class ModulatorStrategy:
    """Unimodular family f_q(t) replacing the operator phases inside H0.

    Kinds: ``static_unit`` (f = 1), ``recoil_phase``
    (f_q(t) = exp(i (eps_{k0} - eps_{k0+q}) t), referenced to the initial
    momentum), ``custom_phase`` (f = exp(i phi(q, t)) for a user-supplied real
    phase function).
    """

    kind: str
    phase: Callable[[int, float], float] | None = None

    def __post_init__(self):
        if self.kind not in ("static_unit", "recoil_phase", "custom_phase"):
            raise ValueError(f"unknown modulator kind {self.kind!r}")
        if self.kind == "custom_phase" and self.phase is None:
            raise ValueError("custom_phase requires a phase function")

    @classmethod
    def static_unit(cls) -> "ModulatorStrategy":
        return cls(kind="static_unit")

    @classmethod
    def recoil_phase(cls) -> "ModulatorStrategy":
        return cls(kind="recoil_phase")

    @classmethod
    def custom_phase(cls, phase: Callable[[int, float], float]) -> "ModulatorStrategy":
        return cls(kind="custom_phase", phase=phase)

    def factors(self, model: Model, k0: int, offsets, t: float) -> np.ndarray:
        """f_q(t) for each offset; always unimodular."""
        if self.kind == "static_unit":
            return np.ones(len(offsets), dtype=complex)
        if self.kind == "recoil_phase":
            eps = model.energies()
            lat = model.lattice
            detune = np.array([eps[k0] - eps[lat.shift_index(k0, q)] for q in offsets])
            return np.exp(1j * detune * t)
        phases = np.array([self.phase(q, t) for q in offsets], dtype=float)
        return np.exp(1j * phases)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid from t0 to t_end (t0 < t_end, t0 <= 0 allowed)."""

    t0: float
    t_end: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t0) / self.steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)

    def midpoint(self, i: int) -> float:
        return self.t0 + self.dt * (i + 0.5)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t0, self.t_end, self.steps * factor)


def _phase_diff_matrix(energies: np.ndarray, t: float) -> np.ndarray:
    """exp(i (eps_i - eps_j) t); exactly ones for flat dispersion."""
    return np.exp(1j * t * (energies[:, None] - energies[None, :]))


def rho_t_matrix(model: Model, q: int, t: float) -> np.ndarray:
    """Interaction-picture rho_q(t) on the particle factor: the shift matrix
    dressed with phases exp(i (eps_k - eps_{k+q}) t)."""
    return shift_matrix(model.lattice, q) * _phase_diff_matrix(model.energies(), t)


def hamiltonian_full(model: Model, couplings: CouplingSet, t: float = 0.0,
                     picture: str = "schrodinger") -> ProductOperator:
    """Full interaction Hamiltonian, Schroedinger or interaction picture."""
    if picture not in ("schrodinger", "interaction"):
        raise ValueError(f"unknown picture {picture!r}")
    gp = couplings.particle_matrix()
    b = oscillator_annihilation(model.osc)
    if picture == "interaction":
        gp = gp * _phase_diff_matrix(model.energies(), t)
        osc_phase = np.exp(1j * model.osc.omega * t)
    else:
        osc_phase = 1.0
    return ProductOperator(((gp, osc_phase * b.conj().T),
                            (gp.conj().T, np.conj(osc_phase) * b)))


def commutator_rho_t(model: Model, q: int, q_prime: int, t: float, t_prime: float) -> np.ndarray:
    """[rho_q(t), rho_q'(t')] on the particle factor, computed directly from
    the dense interaction-picture operators."""
    r1 = rho_t_matrix(model, q, t)
    r2 = rho_t_matrix(model, q_prime, t_prime)
    return r1 @ r2 - r2 @ r1


def modulated_particle_matrix(model: Model, couplings: CouplingSet,
                              strategy: ModulatorStrategy, k0: int, t: float) -> np.ndarray:
    """A(t) = sum_q g_q f_q(t) rho_q; a circulant for every strategy, so
    values at different times commute."""
    f = strategy.factors(model, k0, couplings.offsets, t)
    N = model.lattice.sites
    mat = np.zeros((N, N), dtype=complex)
    for (q, g), fq in zip(couplings.items, f):
        mat += g * fq * shift_matrix(model.lattice, q)
    return mat


def split_hamiltonian(model: Model, couplings: CouplingSet, strategy: ModulatorStrategy,
                      t: float, k0: int) -> tuple[ProductOperator, ProductOperator]:
    """(H0, H1) with H0 = b^dag e^{iwt} A(t) + h.c. and H1 the remainder of
    the interaction-picture Hamiltonian.  H0 + H1 reproduces the full
    operator entrywise."""
    b = oscillator_annihilation(model.osc)
    osc_phase = np.exp(1j * model.osc.omega * t)
    a_mat = modulated_particle_matrix(model, couplings, strategy, k0, t)
    gp_t = couplings.particle_matrix() * _phase_diff_matrix(model.energies(), t)
    h0 = ProductOperator(((a_mat, osc_phase * b.conj().T),
                          (a_mat.conj().T, np.conj(osc_phase) * b)))
    h1 = ProductOperator(((gp_t - a_mat, osc_phase * b.conj().T),
                          ((gp_t - a_mat).conj().T, np.conj(osc_phase) * b)))
    return h0, h1


def _unitary_step(h_dense: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i dt H) for Hermitian H via eigendecomposition; exactly the
    identity for a vanishing generator."""
    if not np.any(h_dense):
        return np.eye(h_dense.shape[0], dtype=complex)
    w, v = np.linalg.eigh(h_dense)
    return (v * np.exp(-1j * dt * w)) @ v.conj().T


def check_stability(model: Model, couplings: CouplingSet, grid: TimeGrid) -> None:
    """Reject grids with dt ||H|| beyond the stability guard; the spectral
    norm is picture-invariant."""
    h = hamiltonian_full(model, couplings, picture="schrodinger").dense()
    hnorm = np.linalg.norm(h, 2)
    if grid.dt * hnorm >= STABILITY_LIMIT:
        raise ValueError(
            f"dt*||H|| = {grid.dt * hnorm:.3g} exceeds stability guard {STABILITY_LIMIT}")


@dataclass(frozen=True)
class ZeroOrderSolution:
    """h_q(t), chi(t) and U0(t) accumulated on a half-step grid.

    Arrays are indexed by half-steps j = 0..2*steps (time t0 + j*dt/2); grid
    points are the even entries.  U0 matrices are assembled on demand.
    """

    model: Model
    couplings: CouplingSet
    strategy: ModulatorStrategy
    grid: TimeGrid
    k0: int
    h_half: np.ndarray      # (2*steps+1, n_offsets)
    hdot_half: np.ndarray   # (2*steps+1, n_offsets)
    chi_half: np.ndarray    # (2*steps+1, N, N)

    @property
    def offsets(self) -> tuple[int, ...]:
        return self.couplings.offsets

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def half_index(self, step: int, mid: bool = False) -> int:
        return 2 * step + (1 if mid else 0)

    def coefficients_at(self, step: int, mid: bool = False) -> CoefficientSet:
        j = self.half_index(step, mid)
        return CoefficientSet(self.model.lattice,
                              tuple(zip(self.offsets, self.h_half[j])))

    def q_matrix(self, step: int, mid: bool = False) -> np.ndarray:
        j = self.half_index(step, mid)
        N = self.model.lattice.sites
        mat = np.zeros((N, N), dtype=complex)
        for q, v in zip(self.offsets, self.h_half[j]):
            mat += v * shift_matrix(self.model.lattice, q)
        return mat

    def chi(self, step: int, mid: bool = False) -> np.ndarray:
        return self.chi_half[self.half_index(step, mid)]

    def u0_generator_hermitian(self, step: int, mid: bool = False) -> np.ndarray:
        """i * generator of U0: i(Q b^dag - Q^dag b) + chi, a Hermitian matrix
        so that U0 = exp(-i * this)."""
        qp = self.q_matrix(step, mid)
        b = oscillator_annihilation(self.model.osc)
        return (1j * (np.kron(qp, b.conj().T) - np.kron(qp.conj().T, b))
                + np.kron(self.chi(step, mid), np.eye(self.model.osc.levels)))

    def u0(self, step: int, mid: bool = False) -> np.ndarray:
        """Dense zero-order evolution operator at a grid point or midpoint."""
        return _unitary_step(self.u0_generator_hermitian(step, mid), 1.0)

    def zero_order_state(self, step: int) -> np.ndarray:
        """U0(t)|0,k0), the exact solution of the H0 dynamics."""
        psi0 = make_basis_state(self.model, self.k0, 0).reshape(-1)
        return (self.u0(step) @ psi0).reshape(self.model.shape)

    def unitarity_error(self, step: int) -> float:
        u = self.u0(step)
        return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), 2))

    def chi_hermiticity_error(self, step: int) -> float:
        c = self.chi(step)
        return float(np.linalg.norm(c - c.conj().T, 2))


def zero_order_solution(model: Model, couplings: CouplingSet, strategy: ModulatorStrategy,
                        grid: TimeGrid, k0: int) -> ZeroOrderSolution:
    """Accumulate h_q(t) and chi(t) by composite trapezoid on a half-step grid.

    hdot_q(t) = -i g_q f_q(t) e^{iwt} is analytic; chi's integrand
    (i/2)(Q^dag Qdot - Qdot^dag Q) is Hermitian, keeping chi Hermitian at
    every stored time.  Raises if the accumulated amplitude breaks the
    truncation rule ||Q||^2 <= cutoff/4.
    """
    if not 0 <= int(k0) < model.lattice.sites:
        raise ValueError(f"momentum index {k0} out of range")
    check_stability(model, couplings, grid)
    offsets = couplings.offsets
    g_vals = couplings.values
    n_half = 2 * grid.steps + 1
    dt_half = grid.dt / 2.0
    taus = grid.t0 + dt_half * np.arange(n_half)
    omega = model.osc.omega
    N = model.lattice.sites

    h = np.zeros((n_half, len(offsets)), dtype=complex)
    hdot = np.zeros_like(h)
    chi = np.zeros((n_half, N, N), dtype=complex)
    shifts = [shift_matrix(model.lattice, q) for q in offsets]

    def q_of(vals: np.ndarray) -> np.ndarray:
        mat = np.zeros((N, N), dtype=complex)
        for s, v in zip(shifts, vals):
            mat += v * s
        return mat

    def chi_integrand(h_vals: np.ndarray, hd_vals: np.ndarray) -> np.ndarray:
        qm = q_of(h_vals)
        qd = q_of(hd_vals)
        return 0.5j * (qm.conj().T @ qd - qd.conj().T @ qm)

    for j in range(n_half):
        hdot[j] = -1j * g_vals * strategy.factors(model, k0, offsets, taus[j]) \
            * np.exp(1j * omega * taus[j])
    for j in range(1, n_half):
        h[j] = h[j - 1] + 0.5 * dt_half * (hdot[j - 1] + hdot[j])
    prev = chi_integrand(h[0], hdot[0])
    for j in range(1, n_half):
        cur = chi_integrand(h[j], hdot[j])
        chi[j] = chi[j - 1] + 0.5 * dt_half * (prev + cur)
        prev = cur

    amp_bound = np.abs(h).sum(axis=1).max() if offsets else 0.0
    if amp_bound ** 2 > model.osc.cutoff / 4.0:
        amp = max(np.linalg.norm(q_of(h[j]), 2) for j in range(0, n_half, 2))
        if amp ** 2 > model.osc.cutoff / 4.0:
            raise ValueError(
                f"accumulated amplitude^2 = {amp ** 2:.3g} exceeds cutoff/4 = "
                f"{model.osc.cutoff / 4.0:.3g}; raise the cutoff or weaken the coupling")

    return ZeroOrderSolution(model=model, couplings=couplings, strategy=strategy,
                             grid=grid, k0=k0, h_half=h, hdot_half=hdot, chi_half=chi)


def u0_commutators_check(sol: ZeroOrderSolution, step: int, tol: float = 1e-6,
                         keep_levels: int | None = None) -> float:
    """Max residual of the four ladder/evolution commutation relations
    [b, U0] = U0 Q, [b, U0^dag] = -U0^dag Q, [b^dag, U0] = U0 Q^dag,
    [b^dag, U0^dag] = -U0^dag Q^dag.

    The relations are exact at infinite cutoff; truncating the generator
    leaves a boundary layer below the top Fock level whose magnitude at
    distance d from the cutoff falls off like (||Q|| sqrt(levels))^d / d!.
    The residual is therefore measured on levels <= `keep_levels`, chosen by
    default as the largest subspace where that bound stays below tol/10.
    """
    model = sol.model
    u = sol.u0(step)
    qp = sol.q_matrix(step)
    levels = model.osc.levels
    b = np.kron(np.eye(model.lattice.sites), oscillator_annihilation(model.osc))
    q_full = np.kron(qp, np.eye(levels))
    if keep_levels is None:
        scale = np.linalg.norm(qp, 2) * np.sqrt(levels)
        bound, depth = 1.0, 0
        while bound >= 0.1 * tol:
            depth += 1
            bound *= scale / depth
        keep_levels = model.osc.cutoff - depth
    if keep_levels < 0:
        raise ValueError("amplitude too large for a reliable subspace at this cutoff")
    mask = np.zeros(levels)
    mask[:keep_levels + 1] = 1.0
    proj = np.kron(np.eye(model.lattice.sites), np.diag(mask))

    ud = u.conj().T
    bd = b.conj().T
    qd = q_full.conj().T
    residuals = [
        (b @ u - u @ b) - u @ q_full,
        (b @ ud - ud @ b) + ud @ q_full,
        (bd @ u - u @ bd) - u @ qd,
        (bd @ ud - ud @ bd) + ud @ qd,
    ]
    return float(max(np.linalg.norm(proj @ r @ proj, 2) for r in residuals))


class ResidualResult(NamedTuple):
    """Trajectory of the rotated-frame state |t> on the grid."""
    sol: ZeroOrderSolution
    states: np.ndarray  # (steps+1, N, levels)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def physical_state(self, step: int) -> np.ndarray:
        """U0(t)|t>, the interaction-picture state."""
        flat = self.states[step].reshape(-1)
        return (self.sol.u0(step) @ flat).reshape(self.sol.model.shape)


def propagate_residual(sol: ZeroOrderSolution) -> ResidualResult:
    """Integrate i d/dt |t> = U0^dag(t) H1(t) U0(t) |t> from |0,k0) with a
    unitary midpoint-exponential stepper; returns the full trajectory."""
    model = sol.model
    grid = sol.grid
    psi = make_basis_state(model, sol.k0, 0).reshape(-1)
    states = np.empty((grid.steps + 1,) + model.shape, dtype=complex)
    states[0] = psi.reshape(model.shape)
    for i in range(grid.steps):
        t_mid = grid.midpoint(i)
        _, h1 = split_hamiltonian(model, sol.couplings, sol.strategy, t_mid, sol.k0)
        h1_dense = h1.dense()
        if np.any(h1_dense):
            u0m = sol.u0(i, mid=True)
            h_tilde = u0m.conj().T @ h1_dense @ u0m
            psi = _unitary_step(h_tilde, grid.dt) @ psi
        states[i + 1] = psi.reshape(model.shape)
    return ResidualResult(sol=sol, states=states)


class ResidualReport(NamedTuple):
    times: np.ndarray
    deviation: np.ndarray       # || |t> - |0,k0) || over time
    h_norm: np.ndarray          # l2 norm of h_q(t) over time
    integrated_h1_norm: float   # int ||H1(t')|| dt', first-order bound


def residual_magnitude_report(sol: ZeroOrderSolution,
                              residual: ResidualResult | None = None,
                              norm_samples: int = 200) -> ResidualReport:
    """Diagnostics for strategy comparison: deviation of the rotated-frame
    state from the initial one, the h amplitude, and the first-order bound
    int ||H1|| dt (spectral norm is conjugation-invariant, so H1 is measured
    directly; sampled on a decimated set of midpoints)."""
    if residual is None:
        residual = propagate_residual(sol)
    grid = sol.grid
    psi0 = residual.states[0]
    deviation = np.linalg.norm(
        (residual.states - psi0).reshape(grid.steps + 1, -1), axis=1)
    h_norm = np.linalg.norm(sol.h_half[::2], axis=1)
    stride = max(1, grid.steps // norm_samples)
    total = 0.0
    for i in range(0, grid.steps, stride):
        width = min(stride, grid.steps - i) * grid.dt
        _, h1 = split_hamiltonian(sol.model, sol.couplings, sol.strategy,
                                  grid.midpoint(i), sol.k0)
        total += width * float(np.linalg.norm(h1.dense(), 2))
    return ResidualReport(times=grid.times, deviation=deviation, h_norm=h_norm,
                          integrated_h1_norm=total)
