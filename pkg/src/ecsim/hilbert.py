"""Truncated particle-ring x oscillator Hilbert space and its elementary operators.

A single spinless particle lives on a periodic momentum lattice (``Lattice``),
a harmonic oscillator on a truncated Fock ladder (``OscillatorSpec``).  States
are complex arrays of shape ``(sites, cutoff + 1)`` indexed by
(momentum index, Fock level); operators are sums of tensor products of a
particle matrix and an oscillator matrix (``ProductOperator``).

Natural units, hbar = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

TWO_PI = 2.0 * np.pi

DISPERSION_KINDS = ("quadratic", "tight_binding", "flat")


@dataclass(frozen=True)
class Lattice:
    """Periodic momentum lattice of a particle on a ring of circumference `length`.

    Momenta are k_n = 2*pi*n/length with integer quantum numbers n in a window
    centred on zero: symmetric for odd `sites`, ``[-N/2, N/2)`` for even.
    Index arithmetic (momentum shifts) wraps modulo `sites`; for even `sites`
    the window is closed under negation only modulo the reciprocal lattice,
    which is the convention documented here.
    """

    sites: int
    length: float

    def __post_init__(self):
        if self.sites < 1:
            raise ValueError(f"sites must be positive, got {self.sites}")
        if self.length <= 0:
            raise ValueError(f"length must be positive, got {self.length}")

    @property
    def n_min(self) -> int:
        return -(self.sites // 2)

    @property
    def quanta(self) -> np.ndarray:
        """Integer momentum quantum numbers, ordered by array index."""
        return np.arange(self.sites) + self.n_min

    @property
    def momenta(self) -> np.ndarray:
        """Momentum values k_n = 2*pi*n/length in index order."""
        return TWO_PI * self.quanta / self.length

    @property
    def spacing(self) -> float:
        """Lattice constant a = length/sites; positions commensurate with the
        lattice (where the plane-wave contraction identities are exact) are
        integer multiples of this."""
        return self.length / self.sites

    def wrap_offset(self, q: int) -> int:
        """Canonical representative of an integer momentum offset."""
        return (int(q) - self.n_min) % self.sites + self.n_min

    def offset_momentum(self, q: int) -> float:
        """Momentum carried by an integer offset (canonical representative)."""
        return TWO_PI * self.wrap_offset(q) / self.length

    def index_of(self, quantum: int) -> int:
        """Array index of the momentum with quantum number `quantum`."""
        idx = int(quantum) - self.n_min
        if not 0 <= idx < self.sites:
            raise ValueError(
                f"momentum quantum number {quantum} outside window "
                f"[{self.n_min}, {self.n_min + self.sites - 1}]")
        return idx

    def shift_index(self, index: int, offset: int) -> int:
        """Index of momentum `index` shifted by `offset` quanta (wraps)."""
        return (int(index) + int(offset)) % self.sites


@dataclass(frozen=True)
class Dispersion:
    """Particle dispersion relation evaluated on the lattice momenta.

    Kinds: ``quadratic`` (k^2/(2*mass), with the documented wrap-around
    discontinuity at the zone edge), ``tight_binding``
    (-hopping*cos(2*pi*n/N), exactly periodic), ``flat`` (constant `value`).
    """

    kind: str
    mass: float = 1.0
    hopping: float = 1.0
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in DISPERSION_KINDS:
            raise ValueError(f"unknown dispersion kind {self.kind!r}")
        if self.kind == "quadratic" and self.mass <= 0:
            raise ValueError("mass must be positive")

    @classmethod
    def quadratic(cls, mass: float = 1.0) -> "Dispersion":
        return cls(kind="quadratic", mass=mass)

    @classmethod
    def tight_binding(cls, hopping: float = 1.0) -> "Dispersion":
        return cls(kind="tight_binding", hopping=hopping)

    @classmethod
    def flat(cls, value: float = 0.0) -> "Dispersion":
        return cls(kind="flat", value=value)

    def energies(self, lattice: Lattice) -> np.ndarray:
        """Energy per momentum index; always real."""
        if self.kind == "quadratic":
            return lattice.momenta ** 2 / (2.0 * self.mass)
        if self.kind == "tight_binding":
            return -self.hopping * np.cos(TWO_PI * lattice.quanta / lattice.sites)
        return np.full(lattice.sites, self.value, dtype=float)


@dataclass(frozen=True)
class OscillatorSpec:
    """Truncated oscillator: Fock levels 0..cutoff, frequency omega."""

    cutoff: int
    omega: float

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.cutoff}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")

    @property
    def levels(self) -> int:
        return self.cutoff + 1


@dataclass(frozen=True)
class Model:
    """Bundle of lattice, dispersion and oscillator defining the product space."""

    lattice: Lattice
    dispersion: Dispersion
    osc: OscillatorSpec

    @property
    def dim(self) -> int:
        return self.lattice.sites * self.osc.levels

    @property
    def shape(self) -> tuple[int, int]:
        return (self.lattice.sites, self.osc.levels)

    def energies(self) -> np.ndarray:
        return self.dispersion.energies(self.lattice)


def make_basis_state(model: Model, k0_index: int, n: int) -> np.ndarray:
    """Unit vector |n, k0): Fock level n, particle momentum index k0_index."""
    N, levels = model.shape
    if not 0 <= int(k0_index) < N:
        raise ValueError(f"momentum index {k0_index} out of range [0, {N})")
    if not 0 <= int(n) < levels:
        raise ValueError(f"Fock level {n} out of range [0, {levels})")
    state = np.zeros(model.shape, dtype=complex)
    state[int(k0_index), int(n)] = 1.0
    return state


def state_norm(state: np.ndarray) -> float:
    return float(np.linalg.norm(state))


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """<a|b> with the first argument conjugated."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>| / (||a|| ||b||)."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("fidelity undefined for zero vectors")
    return float(abs(np.vdot(a, b)) / (na * nb))


@dataclass(frozen=True)
class ProductOperator:
    """Sum of tensor products (particle matrix) x (oscillator matrix).

    Application to a state of shape (N, levels) is
    ``sum_i P_i @ state @ O_i.T``.  All stored matrices are read-only.
    """

    terms: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        frozen = []
        for p, o in self.terms:
            p = np.asarray(p, dtype=complex)
            o = np.asarray(o, dtype=complex)
            if p.ndim != 2 or p.shape[0] != p.shape[1]:
                raise ValueError("particle factor must be a square matrix")
            if o.ndim != 2 or o.shape[0] != o.shape[1]:
                raise ValueError("oscillator factor must be a square matrix")
            p = p.copy()
            o = o.copy()
            p.flags.writeable = False
            o.flags.writeable = False
            frozen.append((p, o))
        object.__setattr__(self, "terms", tuple(frozen))

    @classmethod
    def single(cls, particle: np.ndarray, oscillator: np.ndarray) -> "ProductOperator":
        return cls(terms=((particle, oscillator),))

    @classmethod
    def identity(cls, model: Model) -> "ProductOperator":
        return cls.single(np.eye(model.lattice.sites), np.eye(model.osc.levels))

    @property
    def shape(self) -> tuple[int, int]:
        p, o = self.terms[0]
        return (p.shape[0], o.shape[0])

    def apply(self, state: np.ndarray) -> np.ndarray:
        if state.shape != self.shape:
            raise ValueError(f"state shape {state.shape} incompatible with operator {self.shape}")
        out = np.zeros_like(state, dtype=complex)
        for p, o in self.terms:
            out += p @ state @ o.T
        return out

    def dense(self) -> np.ndarray:
        """Explicit matrix on the flattened product space (kron ordering
        matches C-order flattening of (N, levels) states)."""
        N, levels = self.shape
        out = np.zeros((N * levels, N * levels), dtype=complex)
        for p, o in self.terms:
            out += np.kron(p, o)
        return out

    def dagger(self) -> "ProductOperator":
        return ProductOperator(tuple((p.conj().T, o.conj().T) for p, o in self.terms))

    def __add__(self, other: "ProductOperator") -> "ProductOperator":
        if self.shape != other.shape:
            raise ValueError("operator shape mismatch")
        return ProductOperator(self.terms + other.terms)

    def __neg__(self) -> "ProductOperator":
        return ProductOperator(tuple((-p, o) for p, o in self.terms))

    def __sub__(self, other: "ProductOperator") -> "ProductOperator":
        return self + (-other)

    def __mul__(self, scalar: complex) -> "ProductOperator":
        return ProductOperator(tuple((scalar * p, o) for p, o in self.terms))

    __rmul__ = __mul__

    def __matmul__(self, other: "ProductOperator") -> "ProductOperator":
        if self.shape != other.shape:
            raise ValueError("operator shape mismatch")
        terms = tuple((p1 @ p2, o1 @ o2)
                      for p1, o1 in self.terms for p2, o2 in other.terms)
        return ProductOperator(terms)


def shift_matrix(lattice: Lattice, q: int) -> np.ndarray:
    """Particle matrix of the density Fourier component rho_q: the unitary
    shift taking momentum component k+q to k, i.e. |p> -> |p-q> (indices
    wrap modulo the lattice)."""
    N = lattice.sites
    qw = lattice.wrap_offset(q) % N
    mat = np.zeros((N, N), dtype=complex)
    cols = np.arange(N)
    mat[(cols - qw) % N, cols] = 1.0
    return mat


def rho(model: Model, q: int) -> ProductOperator:
    """Density Fourier component rho_q in the one-particle sector; identity
    on the oscillator factor."""
    return ProductOperator.single(shift_matrix(model.lattice, q), np.eye(model.osc.levels))


def oscillator_annihilation(osc: OscillatorSpec) -> np.ndarray:
    """Truncated annihilation matrix: b|n> = sqrt(n)|n-1>."""
    return np.diag(np.sqrt(np.arange(1, osc.levels)), 1).astype(complex)


def ladder_b(model: Model) -> ProductOperator:
    """Annihilation operator, identity on the particle factor."""
    return ProductOperator.single(np.eye(model.lattice.sites),
                                  oscillator_annihilation(model.osc))


def ladder_b_dag(model: Model) -> ProductOperator:
    """Creation operator; b^dag|cutoff> = 0 under truncation."""
    return ProductOperator.single(np.eye(model.lattice.sites),
                                  oscillator_annihilation(model.osc).conj().T)


@dataclass(frozen=True)
class CoefficientSet:
    """Map from momentum offsets q to complex coefficients h_q.

    Offsets are canonicalized modulo the lattice; coefficients landing on the
    same canonical offset are summed.  Absent offsets are zero.
    """

    lattice: Lattice
    items: tuple[tuple[int, complex], ...] = field(default_factory=tuple)

    def __post_init__(self):
        merged: dict[int, complex] = {}
        for q, v in self.items:
            qc = self.lattice.wrap_offset(q)
            merged[qc] = merged.get(qc, 0.0) + complex(v)
        object.__setattr__(self, "items", tuple(sorted(merged.items())))

    @classmethod
    def from_dict(cls, lattice: Lattice, values: Mapping[int, complex]) -> "CoefficientSet":
        return cls(lattice, tuple((int(q), complex(v)) for q, v in values.items()))

    @classmethod
    def single_mode(cls, lattice: Lattice, q0: int, amplitude: complex) -> "CoefficientSet":
        return cls(lattice, ((int(q0), complex(amplitude)),))

    @classmethod
    def zero(cls, lattice: Lattice) -> "CoefficientSet":
        return cls(lattice, ())

    def get(self, q: int) -> complex:
        qc = self.lattice.wrap_offset(q)
        for qq, v in self.items:
            if qq == qc:
                return v
        return 0.0

    def scaled(self, factor: complex) -> "CoefficientSet":
        return CoefficientSet(self.lattice, tuple((q, factor * v) for q, v in self.items))

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.items)

    @property
    def l2_amplitude(self) -> float:
        return float(np.sqrt(sum(abs(v) ** 2 for _, v in self.items)))

    def particle_matrix(self) -> np.ndarray:
        """Q on the particle factor: sum_q h_q * shift(q).  A circulant, so
        any two such matrices (and their adjoints) commute."""
        N = self.lattice.sites
        mat = np.zeros((N, N), dtype=complex)
        for q, v in self.items:
            mat += v * shift_matrix(self.lattice, q)
        return mat

    def operator_amplitude(self) -> float:
        """Largest displacement amplitude over the commuting family's
        eigenbranches, ||Q||_2."""
        if not self.items:
            return 0.0
        return float(np.linalg.norm(self.particle_matrix(), 2))


def build_Q(model: Model, h: CoefficientSet) -> ProductOperator:
    """Q = sum_q h_q rho_q, acting on the particle factor only."""
    return ProductOperator.single(h.particle_matrix(), np.eye(model.osc.levels))
