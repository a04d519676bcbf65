"""Single-pulse phase gate on two trapped ions sharing a centre-of-mass mode.

The effective model lives on ``ion_j (control) x ion_k (target) x Fock(n_max)``.
All frequencies are in units of the trap frequency (nu = 1) and hbar = 1.

The Hamiltonian pairs ``|dd, n>`` with ``|uu, n+1>`` through a nonlinear
anti-Jaynes-Cummings coupling; every other matrix element is diagonal
(motion-dependent Stark shifts).  Retuning the two beams (two scalars plus a
global offset) makes exactly one pair, ``n = n_sel``, degenerate.  A pulse of
duration ``pi/|omega_eff|`` then takes ``|dd, n_sel>`` once around its Rabi
cycle and returns it with a sign flip (a "2 pi pulse" in spin language:
the Bloch vector of the two-level pair turns by 2 pi).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    HilbertSpace,
    Operator,
    annihilation,
    expm_unitary,
    fock,
    identity,
    operator,
    qubit,
    sigma_minus,
    sigma_plus,
    subspace_overlap,
    tensor,
)
from .errors import GateQualityError, InvalidTruncationError, ParameterError
from .special import LambDickeContext, f_diagonal, f_factor

log = logging.getLogger(__name__)

DOWN, UP = 0, 1
COMPUTATIONAL = ((DOWN, DOWN), (DOWN, UP), (UP, DOWN), (UP, UP))
QPG_DIAGONAL = np.array([-1.0, 1.0, 1.0, 1.0])


class DispersiveRegimeWarning(UserWarning):
    """Parameters are outside the comfortable dispersive regime."""


@dataclass(frozen=True)
class IonGateParams:
    """Physical parameters of the ion scheme (frequencies in trap units).

    ``g0`` is the constant spectator-mode factor (all non-CM modes in the
    ground state).  ``n_sel`` is the CM occupation whose pair is tuned to
    resonance.
    """

    eta: float
    omega: float
    delta: float
    phi: float = 0.0
    g0: float = 1.0
    n_max: int = 6
    n_sel: int = 0

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ParameterError(f"eta must lie in (0, 1), got {self.eta}")
        if not 0.0 < self.omega < self.delta < 1.0:
            raise ParameterError(
                f"need 0 < omega < delta < 1 (trap units), got omega={self.omega}, delta={self.delta}"
            )
        if self.g0 < 0:
            raise ParameterError(f"g0 must be non-negative, got {self.g0}")
        if self.n_sel < 0:
            raise ParameterError(f"n_sel must be non-negative, got {self.n_sel}")
        if self.n_max < self.n_sel + 3:
            raise InvalidTruncationError(
                f"n_max must be >= n_sel + 3 = {self.n_sel + 3}, got {self.n_max}"
            )
        if self.omega / self.delta > 0.2 * (1 + 1e-9):
            warnings.warn(
                f"omega/delta = {self.omega / self.delta:.3g} > 0.2: weakly dispersive",
                DispersiveRegimeWarning,
                stacklevel=3,
            )
        if self.delta > 0.2 * (1 + 1e-9):
            warnings.warn(
                f"delta = {self.delta:.3g} > 0.2 trap frequencies: sidebands not well resolved",
                DispersiveRegimeWarning,
                stacklevel=3,
            )

    @property
    def omega_o(self) -> float:
        """Two-photon scale omega^2 / delta."""
        return self.omega**2 / self.delta

    @property
    def space(self) -> HilbertSpace:
        return HilbertSpace(qubit(), qubit(), fock(self.n_max))

    @property
    def lamb_dicke(self) -> LambDickeContext:
        return LambDickeContext(self.eta, self.n_max)


@dataclass(frozen=True)
class Compensation:
    """Beam retuning: ``offset * I + ion_j * P_up(j) + ion_k * P_up(k)``."""

    offset: float
    ion_j: float
    ion_k: float

    def operator(self, space: HilbertSpace) -> Operator:
        diag = np.zeros(space.dim)
        for idx in range(space.dim):
            sj, sk = space.labels(idx)[:2]
            diag[idx] = self.offset + self.ion_j * sj + self.ion_k * sk
        return Operator(space, np.diag(diag))


@dataclass(frozen=True)
class GateReport:
    t_gate: float
    omega_eff: float
    fidelity_to_ideal: float
    raw_local_phases: tuple
    leakage: float
    compensation: Compensation
    correction: tuple  # (global, ion_j, ion_k) Z-phase angles
    residual: float
    quality_ok: bool


def omega_eff(p: IonGateParams) -> float:
    """Magnitude of the coupling between ``|dd, n_sel>`` and ``|uu, n_sel+1>``.

    At ``n_sel = 0`` this is ``eta omega_o g0 f_1(0) [f_0(0) - f_0(1)]``.
    For higher levels the creation operator contributes ``sqrt(n_sel + 1)``.
    """
    n = p.n_sel
    f1 = f_factor(n, 1, p.eta)
    df0 = f_factor(n, 0, p.eta) - f_factor(n + 1, 0, p.eta)
    return p.eta * p.omega_o * p.g0 * math.sqrt(n + 1) * f1 * abs(df0)


def _mode_operators(p: IonGateParams):
    # one spare level so that a a^+ is exact on every retained level
    big = p.n_max + 1
    a = annihilation(big).data
    f0 = np.diag(f_diagonal(0, p.eta, big))
    f1 = np.diag(f_diagonal(1, p.eta, big))
    return a, a.conj().T, f0, f1


def _crop(m: np.ndarray, n_max: int) -> Operator:
    k = n_max + 1
    return operator(fock(n_max), m[:k, :k])


def ion_j_self_energy(p: IonGateParams) -> Operator:
    """Sideband Stark shift on the control ion, ``P_up eta^2 a^+F1^2 a - P_down eta^2 F1 a a^+ F1``."""
    a, ad, _, f1 = _mode_operators(p)
    up = _crop(p.eta**2 * ad @ f1 @ f1 @ a, p.n_max)
    down = _crop(p.eta**2 * f1 @ a @ ad @ f1, p.n_max)
    pu = sigma_plus() @ sigma_minus()
    pd = sigma_minus() @ sigma_plus()
    one = identity(HilbertSpace(qubit()))
    h = tensor(pu, one, up) - tensor(pd, one, down)
    return h * (p.omega_o * p.g0)


def ion_k_self_energy(p: IonGateParams) -> Operator:
    """Carrier Stark shift on the target ion, ``(P_down - P_up) F0^2``."""
    _, _, f0, _ = _mode_operators(p)
    f0sq = _crop(f0 @ f0, p.n_max)
    pu = sigma_plus() @ sigma_minus()
    pd = sigma_minus() @ sigma_plus()
    one = identity(HilbertSpace(qubit()))
    h = tensor(one, pd - pu, f0sq)
    return h * (p.omega_o * p.g0)


def pair_coupling_operator(p: IonGateParams) -> Operator:
    """``i eta e^{2i phi} S+_j S+_k [a^+F0 - F0 a^+] F1 + H.c.`` scaled by omega_o g0."""
    a, ad, f0, f1 = _mode_operators(p)
    mode = _crop((ad @ f0 - f0 @ ad) @ f1, p.n_max)
    raise_both = tensor(sigma_plus(), sigma_plus(), mode)
    c = raise_both * (1j * p.eta * np.exp(2j * p.phi) * p.omega_o * p.g0)
    return c + c.dag()


def build_effective_hamiltonian(p: IonGateParams) -> Operator:
    """Time-independent selective Hamiltonian (coupling plus self-energy terms)."""
    return pair_coupling_operator(p) + ion_j_self_energy(p) + ion_k_self_energy(p)


def stark_compensation(p: IonGateParams) -> Compensation:
    """Beam retuning that makes the selected pair degenerate at zero energy.

    Each beam cancels its own ion's shift across the selected transition,
    ``|d, n_sel> -> |u, n_sel + 1>``; the offset puts ``|dd, n_sel>`` at zero.
    """
    sp = p.space
    n = p.n_sel
    hj = np.diag(ion_j_self_energy(p).data).real
    hk = np.diag(ion_k_self_energy(p).data).real
    ej_down, ej_up = hj[sp.index(DOWN, DOWN, n)], hj[sp.index(UP, DOWN, n + 1)]
    ek_down, ek_up = hk[sp.index(DOWN, DOWN, n)], hk[sp.index(DOWN, UP, n + 1)]
    return Compensation(
        offset=float(-(ej_down + ek_down)),
        ion_j=float(ej_down - ej_up),
        ion_k=float(ek_down - ek_up),
    )


def compensated_hamiltonian(p: IonGateParams) -> Operator:
    return build_effective_hamiltonian(p) + stark_compensation(p).operator(p.space)


def pair_coupling(p: IonGateParams, n: int) -> float:
    """``|<uu, n+1| H |dd, n>|`` for the pair starting at CM level ``n``."""
    h = pair_coupling_operator(p)
    return abs(h.element((UP, UP, n + 1), (DOWN, DOWN, n)))


def residual_detuning(p: IonGateParams, n: int) -> float:
    """Energy mismatch of the pair at level ``n`` after compensation (zero at ``n_sel``)."""
    h = compensated_hamiltonian(p)
    return (h.element((UP, UP, n + 1), (UP, UP, n + 1)) - h.element((DOWN, DOWN, n), (DOWN, DOWN, n))).real


def offresonant_transfer(p: IonGateParams, n: int, t: float | None = None) -> float:
    """Two-level transfer probability for the pair at level ``n``.

    With ``t=None`` the time-maximum ``4g^2/(4g^2 + D^2)`` is returned.
    """
    g = pair_coupling(p, n)
    d = residual_detuning(p, n)
    w2 = 4 * g * g + d * d
    if w2 == 0.0:
        return 0.0
    peak = 4 * g * g / w2
    if t is None:
        return peak
    return peak * math.sin(0.5 * math.sqrt(w2) * t) ** 2


def computational_indices(space: HilbertSpace, n: int) -> list:
    return [space.index(sj, sk, n) for sj, sk in COMPUTATIONAL]


def local_z_correction(raw_phases) -> tuple:
    """Global and single-qubit Z angles that map the phases of |du>, |ud>, |uu> to zero.

    ``raw_phases`` are ordered (dd, du, ud, uu).  The |dd> phase is then left
    with the one combination local operations cannot change.
    """
    _, p_du, p_ud, p_uu = raw_phases
    g = p_uu - p_du - p_ud
    return g, -p_ud - g, -p_du - g


def local_z_operator(space: HilbertSpace, correction) -> Operator:
    g, aj, ak = correction
    diag = np.empty(space.dim, dtype=complex)
    for idx in range(space.dim):
        sj, sk = space.labels(idx)[:2]
        diag[idx] = np.exp(1j * (g + aj * sj + ak * sk))
    return Operator(space, np.diag(diag))


def _gate_from_propagator(u: Operator, n: int):
    idx = computational_indices(u.space, n)
    block = u.data[np.ix_(idx, idx)]
    raw = tuple(float(x) for x in np.angle(np.diag(block)))
    corr = local_z_correction(raw)
    fixed = local_z_operator(u.space, corr) @ u
    fblock = fixed.data[np.ix_(idx, idx)]
    residual = float(np.max(np.abs(fblock - np.diag(QPG_DIAGONAL))))
    leakage = float(np.max(1.0 - np.sum(np.abs(block) ** 2, axis=0)))
    ideal_block = np.zeros(u.space.dim, dtype=complex)
    proj = np.zeros(u.space.dim)
    for i, s in zip(idx, QPG_DIAGONAL):
        ideal_block[i] = s
        proj[i] = 1.0
    ideal = Operator(u.space, np.diag(ideal_block + (1 - proj)))
    fid = subspace_overlap(fixed, ideal, Operator(u.space, np.diag(proj)))
    return fixed, raw, corr, residual, max(leakage, 0.0), fid


def gate_time(p: IonGateParams) -> float:
    w = omega_eff(p)
    if w == 0.0:
        raise ParameterError("effective Rabi frequency is zero; no gate time exists")
    return math.pi / w


def qpg_unitary(p: IonGateParams, *, tol: float = 1e-8, strict: bool = False):
    """Propagate the compensated Hamiltonian for one full Rabi cycle.

    Returns the locally corrected propagator and a :class:`GateReport`.  A
    residual above ``tol`` is logged (or raised with ``strict=True``); it is
    expected for ``n_sel > 0``, where ``|uu, n_sel>`` leaks through the
    off-resonant pair below it.
    """
    t = gate_time(p)
    u = expm_unitary(compensated_hamiltonian(p), t)
    fixed, raw, corr, residual, leakage, fid = _gate_from_propagator(u, p.n_sel)
    report = GateReport(
        t_gate=t,
        omega_eff=omega_eff(p),
        fidelity_to_ideal=fid,
        raw_local_phases=raw,
        leakage=leakage,
        compensation=stark_compensation(p),
        correction=corr,
        residual=residual,
        quality_ok=residual < tol,
    )
    if not report.quality_ok:
        msg = f"phase-gate residual {residual:.3e} exceeds {tol:.1e} (leakage {leakage:.3e})"
        if strict:
            raise GateQualityError(msg, report)
        log.warning(msg)
    return fixed, report


def evolve_compensated(p: IonGateParams, t: float) -> Operator:
    return expm_unitary(compensated_hamiltonian(p), t)


# ---------------------------------------------------------------------------
# three-qubit (controlled-controlled rotation) reading of the same pulse


@dataclass(frozen=True)
class ThreeQubitReport:
    theta: float
    t: float
    spectator_phases: dict  # label -> phase removed from that diagonal entry
    leakage: np.ndarray  # per column of the 8x8 view
    leakage_oracle: float  # two-level prediction for |dd,1> -> |uu,2>
    leakage_peak: float  # time-maximum of the same two-level transfer
    block_error: float
    diagonal_error: float
    ok: bool


VIEW_SPACE = HilbertSpace(qubit(), qubit(), fock(1))
BLOCK_LABELS = ((DOWN, DOWN, 0), (UP, UP, 1))


def three_qubit_view(p: IonGateParams, theta: float = math.pi, *, tol: float = 1e-8):
    """8x8 restriction of the compensated propagator to ions x {|0>, |1>}.

    The pulse is stopped at Rabi angle ``theta = |omega_eff| t``.  Inside
    span{|dd,0>, |uu,1>} the result is a rotation by ``theta``.  The six
    spectator states are diagonal; their Stark phases are reported and
    removed.  ``|dd,1>`` leaks to ``|uu,2>`` (outside the view) by the
    off-resonant two-level amount.
    """
    if p.n_sel != 0:
        raise ParameterError("the three-qubit view is defined for n_sel = 0")
    if p.n_max < 3:
        raise InvalidTruncationError("the three-qubit view needs n_max >= 3")
    t = theta / omega_eff(p)
    u = evolve_compensated(p, t).data
    sp = p.space
    view_idx = [sp.index(*VIEW_SPACE.labels(i)) for i in range(8)]
    view = u[np.ix_(view_idx, view_idx)]

    block = [VIEW_SPACE.index(*lab) for lab in BLOCK_LABELS]
    spectators = [i for i in range(8) if i not in block]
    phases = {VIEW_SPACE.labels(i): float(np.angle(view[i, i])) for i in spectators}
    fix = np.ones(8, dtype=complex)
    for i in spectators:
        fix[i] = np.exp(-1j * phases[VIEW_SPACE.labels(i)])
    corrected = fix[:, None] * view

    c, s = math.cos(theta), math.sin(theta)
    e = np.exp(2j * p.phi)
    rotation = np.array([[c, -np.conj(e) * s], [e * s, c]])
    block_error = float(np.max(np.abs(corrected[np.ix_(block, block)] - rotation)))
    target = np.eye(8, dtype=complex)
    target[np.ix_(block, block)] = rotation
    leakage = np.clip(1.0 - np.sum(np.abs(view) ** 2, axis=0), 0.0, None)
    # a leaked column can shrink its diagonal by at most 1 - sqrt(1 - L)
    allowance = 1.0 - np.sqrt(1.0 - leakage)
    dev = np.abs(corrected - target)
    diagonal_error = float(np.max(dev - allowance[None, :]))
    oracle = offresonant_transfer(p, 1, t)
    report = ThreeQubitReport(
        theta=theta,
        t=t,
        spectator_phases=phases,
        leakage=leakage,
        leakage_oracle=oracle,
        leakage_peak=offresonant_transfer(p, 1),
        block_error=block_error,
        diagonal_error=max(diagonal_error, 0.0),
        ok=block_error < tol and diagonal_error < tol,
    )
    return Operator(VIEW_SPACE, corrected), report
