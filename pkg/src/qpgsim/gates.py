"""Ideal two-qubit gates, the QPG-to-CNOT recipe and local-phase equivalence.

Basis order is (dd, du, ud, uu) with the control qubit first.  "Local
phases" means diagonal single-qubit gates ``diag(1, e^{i a})`` on either
qubit, before and after, plus a global phase.  Because each side contributes
only diagonal matrices, the fit reduces to

    b ~ e^{i g} diag(e^{i(x_c s_c + x_t s_t)}) . a . diag(e^{i(y_c s_c + y_t s_t)})

with four free angles ``(x_c, x_t, y_c, y_t)`` and the global phase ``g``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, PreconditionError, RecipeMismatchError

LABELS = ("dd", "du", "ud", "uu")
_BITS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)  # (control, target)
GRID_STEP = math.pi / 16
REFINE_TOL = 1e-10
EQUIV_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TwoQubitGate:
    """4x4 unitary in the (dd, du, ud, uu) basis; control is the first label."""

    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ParameterError(f"two-qubit gate needs a 4x4 matrix, got {m.shape}")
        defect = float(np.max(np.abs(m.conj().T @ m - np.eye(4))))
        if defect >= 1e-10:
            raise ParameterError(f"gate is not unitary (defect {defect:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: "TwoQubitGate") -> "TwoQubitGate":
        return TwoQubitGate(self.matrix @ other.matrix)

    def apply(self, amplitudes) -> np.ndarray:
        return self.matrix @ np.asarray(amplitudes, dtype=complex)


def ideal_qpg() -> TwoQubitGate:
    return TwoQubitGate(np.diag([-1.0, 1.0, 1.0, 1.0]), "QPG")


def ideal_cnot() -> TwoQubitGate:
    """Flip the target when the control is up."""
    m = np.eye(4)
    m[[2, 3]] = m[[3, 2]]
    return TwoQubitGate(m, "CNOT")


def swap() -> TwoQubitGate:
    m = np.eye(4)
    m[[1, 2]] = m[[2, 1]]
    return TwoQubitGate(m, "SWAP")


def hadamard_rotation() -> np.ndarray:
    """The rotation ``|d> -> (|d> - |u>)/sqrt2``, ``|u> -> (|d> + |u>)/sqrt2``.

    Columns are the images of ``|d>`` and ``|u>``.  This is not the symmetric
    Hadamard: its square is ``[[0, 1], [-1, 0]]``, its fourth power is ``-I``
    and its order is 8.
    """
    s = 1 / math.sqrt(2)
    return np.array([[s, s], [-s, s]])


def on_target(single: np.ndarray) -> TwoQubitGate:
    return TwoQubitGate(np.kron(np.eye(2), single))


def on_control(single: np.ndarray) -> TwoQubitGate:
    return TwoQubitGate(np.kron(single, np.eye(2)))


def rotation_order(r: np.ndarray, max_order: int = 64) -> int:
    """Smallest ``k`` with ``r**k = I`` (exact up to 1e-12), or 0 if none up to ``max_order``."""
    acc = np.eye(r.shape[0], dtype=complex)
    for k in range(1, max_order + 1):
        acc = acc @ r
        if np.max(np.abs(acc - np.eye(r.shape[0]))) < 1e-12:
            return k
    return 0


# ---------------------------------------------------------------------------
# local-phase equivalence


@dataclass(frozen=True)
class PhaseFit:
    """Result of fitting ``a`` to ``b`` with diagonal local phases."""

    equivalent: bool
    before: tuple  # (control, target) angles applied before ``a``
    after: tuple  # (control, target) angles applied after ``a``
    global_phase: float
    distance: float  # max |corrected a - b|
    lower_bound: float  # certified: no choice of phases gets below this
    corrected: np.ndarray = field(repr=False, default=None)

    @property
    def phases(self) -> dict:
        return {
            "before_control": self.before[0],
            "before_target": self.before[1],
            "after_control": self.after[0],
            "after_target": self.after[1],
            "global": self.global_phase,
        }


def _phase_vectors(angles):
    """Row/column phase vectors for angles (x_c, x_t, y_c, y_t); broadcasts over leading axes."""
    angles = np.asarray(angles, dtype=float)
    x = angles[..., :2] @ _BITS.T
    y = angles[..., 2:] @ _BITS.T
    return np.exp(1j * x), np.exp(1j * y)


def apply_local_phases(a: np.ndarray, angles, global_phase: float = 0.0) -> np.ndarray:
    left, right = _phase_vectors(angles)
    return np.exp(1j * global_phase) * left[:, None] * a * right[None, :]


def _best_global(c: np.ndarray, b: np.ndarray):
    """Least-squares global phase for ``c`` against ``b`` (vectorised over leading axes)."""
    s = np.sum(np.conj(c) * b, axis=(-2, -1))
    return np.angle(s)


def _grid_search(a: np.ndarray, b: np.ndarray, step: float):
    ticks = np.arange(0.0, 2 * math.pi - 1e-12, step)
    best = (np.inf, None)
    # iterate over the first angle to keep memory bounded
    rest = np.array(list(itertools.product(ticks, repeat=3)))
    for t0 in ticks:
        angles = np.column_stack([np.full(len(rest), t0), rest])
        left, right = _phase_vectors(angles)
        c = left[:, :, None] * a[None] * right[:, None, :]
        g = _best_global(c, b[None])
        c = c * np.exp(1j * g)[:, None, None]
        dist = np.max(np.abs(c - b[None]), axis=(1, 2))
        k = int(np.argmin(dist))
        if dist[k] < best[0] - 1e-15:
            best = (float(dist[k]), (angles[k].copy(), float(g[k])))
    return best[1]


def _refine(a: np.ndarray, b: np.ndarray, angles: np.ndarray, g: float, tol: float, max_sweeps=500):
    """Coordinate descent on ``sum |corrected a - b|^2``; each update is closed form.

    For one angle the objective is ``const - 2 Re(e^{i theta} s)`` where ``s``
    collects the affected entries, so the optimum is ``theta = -arg s``.
    """
    angles = angles.astype(float).copy()
    for _ in range(max_sweeps):
        old = np.append(angles, g)
        for j in range(4):
            # entries touched by angle j: rows (j < 2) or columns (j >= 2) with bit set
            mask = _BITS[:, j % 2] == 1
            angles[j] = 0.0
            c = apply_local_phases(a, angles, g)
            sel = c[mask, :] if j < 2 else c[:, mask]
            tgt = b[mask, :] if j < 2 else b[:, mask]
            s = np.sum(sel * np.conj(tgt))
            angles[j] = -np.angle(s) if abs(s) > 0 else 0.0
        c = apply_local_phases(a, angles, 0.0)
        g = float(_best_global(c, b))
        new = np.append(angles, g)
        if np.max(np.abs(np.angle(np.exp(1j * (new - old))))) < tol:
            break
    return np.mod(angles, 2 * math.pi), float(np.mod(g, 2 * math.pi))


def modulus_lower_bound(a: np.ndarray, b: np.ndarray) -> float:
    """``max | |a_ij| - |b_ij| |``; diagonal phases cannot change entry moduli."""
    return float(np.max(np.abs(np.abs(a) - np.abs(b))))


def _canonical(x: float) -> float:
    # fold 2 pi and tiny negatives to 0 so reported phases are stable
    x = float(np.mod(x, 2 * math.pi))
    if x > 2 * math.pi - 1e-12 or x < 1e-12:
        return 0.0
    return x


def equal_up_to_local_phases(
    a: TwoQubitGate, b: TwoQubitGate, *, tol: float = EQUIV_TOL, step: float = GRID_STEP
) -> PhaseFit:
    """Fit local diagonal phases (plus a global phase) taking ``a`` to ``b``.

    A deterministic grid at ``step`` per angle seeds a coordinate-descent
    refinement.  Success means the max-entry distance is below ``tol``.
    """
    am, bm = a.matrix, b.matrix
    angles, g = _grid_search(am, bm, step)
    angles, g = _refine(am, bm, angles, g, REFINE_TOL)
    angles = np.array([_canonical(x) for x in angles])
    g = _canonical(g)
    corrected = apply_local_phases(am, angles, g)
    dist = float(np.max(np.abs(corrected - bm)))
    return PhaseFit(
        equivalent=dist < tol,
        before=(float(angles[2]), float(angles[3])),
        after=(float(angles[0]), float(angles[1])),
        global_phase=g,
        distance=dist,
        lower_bound=modulus_lower_bound(am, bm),
        corrected=corrected,
    )


# ---------------------------------------------------------------------------
# QPG -> CNOT


@dataclass(frozen=True)
class RecipeReport:
    rotation: np.ndarray
    composition: np.ndarray  # (I x R) QPG (I x R), before any correction
    fit: PhaseFit

    @property
    def phases(self) -> dict:
        return self.fit.phases


def recipe_composition(qpg: TwoQubitGate, rotation: np.ndarray | None = None) -> TwoQubitGate:
    """Rotate the target, apply the gate, rotate the target again with the same rotation."""
    r = on_target(hadamard_rotation() if rotation is None else rotation)
    return r @ qpg @ r


def cnot_from_qpg(qpg: TwoQubitGate, *, tol: float = EQUIV_TOL):
    """Turn a phase gate into CNOT with the target rotation plus local phases.

    Returns ``(corrected gate, RecipeReport)``.
    """
    dev = float(np.max(np.abs(qpg.matrix - ideal_qpg().matrix)))
    if dev >= 1e-8:
        raise PreconditionError(f"input is not diag(-1, 1, 1, 1) (max deviation {dev:.3e})")
    comp = recipe_composition(qpg)
    fit = equal_up_to_local_phases(comp, ideal_cnot(), tol=tol)
    report = RecipeReport(hadamard_rotation(), comp.matrix, fit)
    if not fit.equivalent:
        raise RecipeMismatchError(
            f"no local-phase correction reaches {tol:g} (best {fit.distance:.3e})",
            fit.distance,
            fit,
        )
    return TwoQubitGate(fit.corrected, "CNOT (from QPG)"), report


# ---------------------------------------------------------------------------
# entanglement witness


def reduced_purity(amplitudes) -> float:
    """Purity of the control qubit's reduced state for a two-qubit pure state."""
    psi = np.asarray(amplitudes, dtype=complex).reshape(2, 2)
    psi = psi / np.linalg.norm(psi)
    rho = psi @ psi.conj().T
    return float(np.real(np.trace(rho @ rho)))


def entangling_witness(gate: TwoQubitGate) -> float:
    """Reduced purity after ``gate`` acts on the uniform product state."""
    return reduced_purity(gate.apply(np.full(4, 0.5)))
