"""Two-mode cavity crossed by a three-level atom.

Effective model: a two-photon coupling on ``Fock1 x Fock2 x {g, e}``,
``H = Omega (|e><g| a1 a2 + h.c.)`` with ``Omega = omega_ei * omega_ig / delta_big``.
A pi pulse (``t = pi / Omega``) sends ``|1,1,g>`` once around the Rabi cycle
and back with a sign flip; every other logical state is dark.

Full model on ``Fock1 x Fock2 x {g, i, e}`` (rotating frame, two-photon
resonance)::

    H = delta_big |i><i| + omega_ig (|i><g| a2 + h.c.) + omega_ei (|e><i| a1 + h.c.)

Mode 2 drives the lower leg g-i and mode 1 the upper leg i-e, each by
absorption, so ``n1 + n2 + w(atom)`` with ``w = (0, 1, 2)`` for ``(g, i, e)``
is conserved.  Eliminating ``|i>`` gives the effective coupling with a
minus sign, which a pi pulse does not see.  It also gives Stark shifts
``-omega_ig^2 n2 / delta_big`` on ``g`` and ``-omega_ei^2 (n1 + 1) / delta_big``
on ``e``.  With ``compensate_stark`` the ``e`` level is raised by
``(omega_ei^2 - omega_ig^2) / delta_big`` so that ``|1,1,g>`` and ``|0,0,e>``
stay degenerate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    HilbertSpace,
    Operator,
    StateVector,
    annihilation,
    atom3,
    eigh_hermitian,
    expm_unitary,
    fock,
    qubit,
    state_fidelity,
    subspace_overlap,
)
from .errors import ParameterError, PreconditionError

G, E = 0, 1  # effective-model atom labels
G3, I3, E3 = 0, 1, 2  # full-model atom labels
ATOM_WEIGHT = (0, 1, 2)
LOGICAL = ((0, 0), (0, 1), (1, 0), (1, 1))
VALIDATION_DELTAS = (10.0, 30.0, 100.0)


class AdiabaticityWarning(UserWarning):
    """The intermediate level is not far enough detuned for adiabatic elimination."""


@dataclass(frozen=True)
class CavityParams:
    """Cavity-scheme parameters in units of ``omega_ei``."""

    omega_ig: float = 0.5
    delta_big: float = 30.0
    omega_ei: float = 1.0
    n_max: int = 2
    compensate_stark: bool = True

    def __post_init__(self):
        for name in ("omega_ig", "delta_big", "omega_ei"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ParameterError(f"{name} must be finite, got {v}")
        if self.delta_big <= 0:
            raise ParameterError(f"delta_big must be positive, got {self.delta_big}")
        if self.omega_ig < 0 or self.omega_ei < 0:
            raise ParameterError("Rabi frequencies must be non-negative")
        if self.n_max < 1:
            raise ParameterError(f"n_max must be >= 1, got {self.n_max}")
        if self.adiabaticity > 0.05:
            warnings.warn(
                f"(omega_ei^2 + omega_ig^2)/delta_big^2 = {self.adiabaticity:.3g} > 0.05",
                AdiabaticityWarning,
                stacklevel=3,
            )

    @property
    def adiabaticity(self) -> float:
        return (self.omega_ei**2 + self.omega_ig**2) / self.delta_big**2

    @property
    def effective_space(self) -> HilbertSpace:
        return HilbertSpace(fock(self.n_max), fock(self.n_max), qubit())

    @property
    def full_space(self) -> HilbertSpace:
        return HilbertSpace(fock(self.n_max), fock(self.n_max), atom3())


def effective_omega(p: CavityParams) -> float:
    if p.delta_big == 0:
        raise ParameterError("delta_big must be non-zero")
    return p.omega_ei * p.omega_ig / p.delta_big


def pi_pulse_time(p: CavityParams) -> float:
    w = effective_omega(p)
    if w == 0.0:
        raise ParameterError("effective Rabi frequency vanishes (omega_ig or omega_ei is 0)")
    return math.pi / w


def _modes(n_max: int, atom_dim: int):
    a = annihilation(n_max).data
    one = np.eye(n_max + 1)
    eye_atom = np.eye(atom_dim)
    a1 = np.kron(np.kron(a, one), eye_atom)
    a2 = np.kron(np.kron(one, a), eye_atom)
    return a1, a2


def _atom_op(n_max: int, atom: np.ndarray) -> np.ndarray:
    return np.kron(np.eye((n_max + 1) ** 2), atom)


def build_cavity_effective(p: CavityParams) -> Operator:
    """``Omega (|e><g| a1 a2 + h.c.)`` on ``Fock1 x Fock2 x {g, e}``."""
    a1, a2 = _modes(p.n_max, 2)
    raise_eg = _atom_op(p.n_max, np.array([[0.0, 0.0], [1.0, 0.0]]))
    up = effective_omega(p) * raise_eg @ a1 @ a2
    return Operator(p.effective_space, up + up.conj().T)


def stark_counterterm(p: CavityParams) -> float:
    """Energy added to ``|e>`` so that ``|1,1,g>`` and ``|0,0,e>`` stay degenerate."""
    return (p.omega_ei**2 - p.omega_ig**2) / p.delta_big


def build_three_level_full(p: CavityParams) -> Operator:
    """Three-level atom plus both modes, optionally Stark-compensated."""
    a1, a2 = _modes(p.n_max, 3)

    def ket_bra(i, j):
        m = np.zeros((3, 3))
        m[i, j] = 1.0
        return _atom_op(p.n_max, m)

    h = p.delta_big * ket_bra(I3, I3)
    up = p.omega_ig * ket_bra(I3, G3) @ a2 + p.omega_ei * ket_bra(E3, I3) @ a1
    h = h + up + up.conj().T
    if p.compensate_stark:
        h = h + stark_counterterm(p) * ket_bra(E3, E3)
    return Operator(p.full_space, h)


def excitation_number(p: CavityParams) -> Operator:
    """``n1 + n2 + w(atom)``, conserved by the full model."""
    n = np.arange(p.n_max + 1, dtype=float)
    diag = (
        n[:, None, None] + n[None, :, None] + np.array(ATOM_WEIGHT, dtype=float)[None, None, :]
    )
    return Operator(p.full_space, np.diag(diag.reshape(-1)))


def logical_state(p: CavityParams, amplitudes, *, full: bool = False) -> StateVector:
    """``sum c_{n1 n2} |n1, n2, g>`` over the logical basis (00, 01, 10, 11)."""
    sp = p.full_space if full else p.effective_space
    amps = np.zeros(sp.dim, dtype=complex)
    for (n1, n2), c in zip(LOGICAL, amplitudes):
        amps[sp.index(n1, n2, 0)] = c
    return StateVector.normalized(sp, amps)


def logical_amplitudes(psi: StateVector) -> np.ndarray:
    return np.array([psi.amplitude(n1, n2, 0) for n1, n2 in LOGICAL])


def _check_logical(psi: StateVector, tol: float = 1e-12):
    amps = np.abs(psi.amplitudes.reshape(psi.space.dims)) ** 2
    excited = float(np.sum(amps[:, :, 1:]))
    if excited > tol:
        raise PreconditionError(f"atom must start in |g> (excited population {excited:.3e})")
    outside = float(np.sum(amps[2:, :, :]) + np.sum(amps[:2, 2:, :]))
    if outside > tol:
        raise PreconditionError(f"modes must start in span{{0,1}} (population outside {outside:.3e})")


def cavity_qpg(p: CavityParams, psi: StateVector, t: float | None = None) -> StateVector:
    """Evolve a logical input under the effective Hamiltonian for a pi pulse.

    ``t`` overrides the pulse length (used to sample the Rabi cycle).
    """
    if psi.space != p.effective_space:
        raise PreconditionError("state must live on Fock1 x Fock2 x {g, e} of matching n_max")
    _check_logical(psi)
    t = pi_pulse_time(p) if t is None else t
    return expm_unitary(build_cavity_effective(p), t) @ psi


# ---------------------------------------------------------------------------
# adiabatic-elimination check


@dataclass(frozen=True)
class AdiabaticPoint:
    delta_big: float
    t_gate: float
    fidelity: float  # |<1,1,g| psi(t)>|^2 for input |1,1,g>
    conditional_phase: float  # phase(11) - phase(10) - phase(01) + phase(00), ideally pi
    gate_fidelity: float  # logical block vs QPG after local Z corrections
    max_intermediate: float  # max over the pulse of P(i) for input |1,1,g>
    intermediate_bound: float  # 4 (omega_ei^2 + omega_ig^2) / delta_big^2
    uncompensated_fidelity: float


def _trajectory_max_population(w, v, psi0, mask, t_end, per_period=24, cap=2_000_000):
    """Max over ``[0, t_end]`` of the population on ``mask``, sampled densely."""
    c = v.conj().T @ psi0
    spread = float(np.max(w) - np.min(w)) if len(w) > 1 else 0.0
    n = int(min(cap, max(200, math.ceil(t_end * spread / (2 * math.pi) * per_period))))
    rows = v[mask] * c[None, :]
    best = 0.0
    for chunk in np.array_split(np.linspace(0.0, t_end, n + 1), max(1, (n + 1) // 20000)):
        amp = rows @ np.exp(-1j * np.outer(w, chunk))
        best = max(best, float(np.max(np.sum(np.abs(amp) ** 2, axis=0))))
    return best


def _full_gate(p: CavityParams, t: float):
    h = build_three_level_full(p)
    w, v = eigh_hermitian(h)
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    idx = [p.full_space.index(n1, n2, G3) for n1, n2 in LOGICAL]
    return w, v, u, idx


def adiabatic_point(p: CavityParams) -> AdiabaticPoint:
    t = pi_pulse_time(p)
    w, v, u, idx = _full_gate(p, t)
    sp = p.full_space
    start = sp.index(1, 1, G3)
    psi0 = np.zeros(sp.dim, dtype=complex)
    psi0[start] = 1.0
    out = StateVector.normalized(sp, u[:, start])
    fid = state_fidelity(out, StateVector(sp, -psi0))

    block = u[np.ix_(idx, idx)]
    ph = np.angle(np.diag(block))
    cphase = float(np.angle(np.exp(1j * (ph[3] - ph[2] - ph[1] + ph[0]))))
    corr = np.exp(-1j * np.array([ph[0], ph[1], ph[2], ph[1] + ph[2] - ph[0]]))
    small = HilbertSpace(qubit(), qubit())
    gate_fid = subspace_overlap(
        Operator(small, corr[:, None] * block),
        Operator(small, np.diag([1.0, 1.0, 1.0, -1.0])),
        Operator(small, np.eye(4)),
    )

    atom = np.array([sp.labels(k)[2] for k in range(sp.dim)])
    p_i = _trajectory_max_population(w, v, psi0, atom == I3, t)

    if p.compensate_stark:
        off = replace(p, compensate_stark=False)
        _, _, u_off, _ = _full_gate(off, t)
        uncomp = float(abs(u_off[start, start]) ** 2)
    else:
        uncomp = fid

    return AdiabaticPoint(
        delta_big=p.delta_big,
        t_gate=t,
        fidelity=fid,
        conditional_phase=cphase,
        gate_fidelity=gate_fid,
        max_intermediate=p_i,
        intermediate_bound=4.0 * (p.omega_ei**2 + p.omega_ig**2) / p.delta_big**2,
        uncompensated_fidelity=uncomp,
    )


@dataclass(frozen=True)
class AdiabaticReport:
    point: AdiabaticPoint  # at the configured delta_big
    sweep: tuple  # AdiabaticPoint per swept delta_big
    increasing: bool | None  # fidelity strictly increasing along the sweep


def validate_adiabatic(p: CavityParams, deltas=VALIDATION_DELTAS) -> AdiabaticReport:
    """Full-model pi pulse at ``p.delta_big`` and along ``deltas``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdiabaticityWarning)
        sweep = tuple(adiabatic_point(replace(p, delta_big=float(d))) for d in deltas)
    fids = [pt.fidelity for pt in sweep]
    inc = all(b > a for a, b in zip(fids, fids[1:])) if len(fids) > 1 else None
    return AdiabaticReport(point=adiabatic_point(p), sweep=sweep, increasing=inc)
