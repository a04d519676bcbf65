"""Dense linear algebra over labelled tensor-product Hilbert spaces.

Conventions
-----------
* hbar = 1.
* Basis ordering is row-major over the factor list: the leftmost factor
  varies slowest.  For ``HilbertSpace(qubit, qubit, fock(n))`` the index of
  ``|a, b, m>`` is ``(2*a + b)*(n + 1) + m``.
* Qubit label 0 is the lower state (spin down / ground), label 1 the upper.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    HermiticityError,
    InvalidTruncationError,
    NotAProjectorError,
    SpaceMismatchError,
)

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
NORM_TOL = 1e-10

_KIND_DIMS = {"qubit": 2, "atom3": 3}


@dataclass(frozen=True)
class Factor:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind in _KIND_DIMS:
            if self.dim != _KIND_DIMS[self.kind]:
                raise ValueError(f"{self.kind} factor must have dim {_KIND_DIMS[self.kind]}")
        elif self.kind == "fock":
            if self.dim < 2:
                raise InvalidTruncationError("fock factor needs n_max >= 1")
        else:
            raise ValueError(f"unknown factor kind {self.kind!r}")

    @property
    def n_max(self) -> int:
        return self.dim - 1


def qubit() -> Factor:
    return Factor("qubit", 2)


def atom3() -> Factor:
    return Factor("atom3", 3)


def fock(n_max: int) -> Factor:
    return Factor("fock", n_max + 1)


@dataclass(frozen=True)
class HilbertSpace:
    factors: tuple

    def __init__(self, *factors: Factor):
        if len(factors) == 1 and not isinstance(factors[0], Factor):
            factors = tuple(factors[0])
        object.__setattr__(self, "factors", tuple(factors))

    @property
    def dims(self) -> tuple:
        return tuple(f.dim for f in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims)) if self.factors else 1

    def index(self, *labels: int) -> int:
        """Flat basis index of the product state with the given labels."""
        if len(labels) != len(self.factors):
            raise ValueError("one label per factor is required")
        return int(np.ravel_multi_index(labels, self.dims))

    def labels(self, index: int) -> tuple:
        return tuple(int(i) for i in np.unravel_index(index, self.dims))

    def __mul__(self, other: "HilbertSpace") -> "HilbertSpace":
        return HilbertSpace(*(self.factors + other.factors))


@dataclass(frozen=True, eq=False)
class Operator:
    space: HilbertSpace
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        n = self.space.dim
        if data.shape != (n, n):
            raise SpaceMismatchError(f"matrix shape {data.shape} does not match dim {n}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.space.dim

    def dag(self) -> "Operator":
        return Operator(self.space, self.data.conj().T)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T), initial=0.0))

    def unitarity_defect(self) -> float:
        return float(np.max(np.abs(self.data.conj().T @ self.data - np.eye(self.dim))))

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return self.hermiticity_defect() < tol

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        return self.unitarity_defect() < tol

    def element(self, bra: Sequence[int], ket: Sequence[int]) -> complex:
        """``<bra|A|ket>`` for product-basis labels."""
        return complex(self.data[self.space.index(*bra), self.space.index(*ket)])

    def _check(self, other: "Operator"):
        if other.space != self.space:
            raise SpaceMismatchError("operators act on different spaces")

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return evolve(self, other)
        self._check(other)
        return Operator(self.space, self.data @ other.data)

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.data + other.data)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.data - other.data)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.space, self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.data)

    def __repr__(self):
        return f"Operator(dims={self.space.dims})"


@dataclass(frozen=True, eq=False)
class StateVector:
    space: HilbertSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (self.space.dim,):
            raise SpaceMismatchError(f"{amps.size} amplitudes for dim {self.space.dim}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) >= NORM_TOL:
            raise ValueError(f"state is not normalised (norm = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, space: HilbertSpace, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(space, amps / np.linalg.norm(amps))

    @classmethod
    def basis(cls, space: HilbertSpace, *labels: int) -> "StateVector":
        amps = np.zeros(space.dim, dtype=complex)
        amps[space.index(*labels)] = 1.0
        return cls(space, amps)

    def amplitude(self, *labels: int) -> complex:
        return complex(self.amplitudes[self.space.index(*labels)])

    def population(self, *labels: int) -> float:
        return abs(self.amplitude(*labels)) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.dim))


def operator(factor: Factor, matrix) -> Operator:
    """Wrap a single-factor matrix as an Operator."""
    return Operator(HilbertSpace(factor), matrix)


def tensor(a: Operator, b: Operator, *more: Operator) -> Operator:
    """Kronecker product; the result space concatenates the factor lists."""
    ops = (a, b) + more
    return reduce(
        lambda x, y: Operator(x.space * y.space, np.kron(x.data, y.data)), ops
    )


def embed(op: Operator, position: int, space: HilbertSpace) -> Operator:
    """Lift a single-factor operator to act on factor ``position`` of ``space``."""
    if op.space.factors != (space.factors[position],):
        raise SpaceMismatchError("operator factor does not match target position")
    mats = [np.eye(f.dim) for f in space.factors]
    mats[position] = op.data
    return Operator(space, reduce(np.kron, mats))


def annihilation(n_max: int) -> Operator:
    if n_max < 1:
        raise InvalidTruncationError(f"n_max must be >= 1, got {n_max}")
    return operator(fock(n_max), np.diag(np.sqrt(np.arange(1, n_max + 1)), 1))


def number(n_max: int) -> Operator:
    return operator(fock(n_max), np.diag(np.arange(n_max + 1, dtype=float)))


def sigma_plus() -> Operator:
    """Raising operator ``|1><0|`` on a qubit."""
    return operator(qubit(), [[0, 0], [1, 0]])


def sigma_minus() -> Operator:
    return operator(qubit(), [[0, 1], [0, 0]])


def sigma_x() -> Operator:
    return operator(qubit(), [[0, 1], [1, 0]])


def projector(space: HilbertSpace, basis_labels: Iterable[Sequence[int]]) -> Operator:
    """Orthogonal projector onto the span of the listed product-basis states."""
    diag = np.zeros(space.dim)
    for labels in basis_labels:
        diag[space.index(*labels)] = 1.0
    return Operator(space, np.diag(diag))


def _hermitian_tol(h: np.ndarray) -> float:
    return HERMITIAN_TOL * max(1.0, float(np.max(np.abs(h), initial=0.0)))


def eigh_hermitian(h: Operator):
    """Eigendecomposition of a Hermitian operator (symmetrised before use)."""
    defect = h.hermiticity_defect()
    if defect >= _hermitian_tol(h.data):
        raise HermiticityError(f"operator is not Hermitian (max|A - A^+| = {defect:.3e})")
    return np.linalg.eigh(0.5 * (h.data + h.data.conj().T))


def expm_unitary(h: Operator, t: float) -> Operator:
    """``exp(-i h t)`` through the Hermitian eigendecomposition of ``h``.

    Accuracy does not degrade with ``|h t|``, unlike series or
    scaling-and-squaring approaches.
    """
    w, v = eigh_hermitian(h)
    return Operator(h.space, (v * np.exp(-1j * w * t)) @ v.conj().T)


def evolve(u: Operator, psi: StateVector) -> StateVector:
    if u.space != psi.space:
        raise SpaceMismatchError("operator and state live on different spaces")
    out = u.data @ psi.amplitudes
    # renormalise away rounding only; a real norm change means u is not unitary
    norm = np.linalg.norm(out)
    if abs(norm - 1.0) >= NORM_TOL:
        raise ValueError(f"evolution changed the norm to {norm!r}; operator is not unitary")
    return StateVector(psi.space, out / norm)


def state_fidelity(psi: StateVector, phi: StateVector) -> float:
    """``|<psi|phi>|^2``."""
    if psi.space != phi.space:
        raise SpaceMismatchError("states live on different spaces")
    return float(min(1.0, abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2))


def subspace_overlap(u_actual: Operator, u_ideal: Operator, proj: Operator) -> float:
    """Phase-insensitive gate overlap on the range of ``proj``.

    Returns ``|Tr(P U_ideal^+ U_actual P)|^2 / d^2`` with ``d = rank P``.
    """
    if not (u_actual.space == u_ideal.space == proj.space):
        raise SpaceMismatchError("gate overlap operands live on different spaces")
    p = proj.data
    if (
        np.max(np.abs(p @ p - p)) > 1e-10
        or np.max(np.abs(p - p.conj().T)) > 1e-10
    ):
        raise NotAProjectorError("projector must satisfy P^2 = P = P^+")
    d = int(round(np.trace(p).real))
    if d == 0:
        raise NotAProjectorError("projector has rank 0")
    tr = np.trace(p @ u_ideal.data.conj().T @ u_actual.data @ p)
    return float(min(1.0, abs(tr) ** 2 / d**2))
