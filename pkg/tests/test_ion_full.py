import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpgsim.core import HilbertSpace, StateVector, fock, qubit
from qpgsim.errors import ConvergenceError, ParameterError
from qpgsim.ion_full import (
    FullIonParams,
    calibrate_resonance,
    converged_propagator,
    dispersive_sweep,
    hamiltonian_at,
    propagate,
    rotating_frame_propagator,
    sequential_propagator,
    stepped_propagator,
    strictly_decreasing,
    validate_effective,
)
from qpgsim.ion_gate import DOWN, UP, DispersiveRegimeWarning, IonGateParams

SMALL = FullIonParams(IonGateParams(0.1, 0.01, 0.1, n_max=3), pad=4)


def gate_state(sj, sk, n_max=6):
    return StateVector.basis(HilbertSpace(qubit(), qubit(), fock(n_max)), sj, sk, 0)


# parameters -------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [dict(dt=2 * math.pi / 40), dict(dt=0.0), dict(t_final=-1.0), dict(pad=2), dict(beams=("III",))],
)
def test_params_rejected(kw):
    with pytest.raises(ParameterError):
        FullIonParams(SMALL.base, **kw)


def test_padded_space():
    assert SMALL.space.dims == (2, 2, 8)


# Hamiltonian --------------------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1e4))
def test_hamiltonian_hermitian(t):
    assert hamiltonian_at(SMALL, t).hermiticity_defect() < 1e-12


def test_no_beams_gives_zero():
    p = FullIonParams(SMALL.base, pad=4, beams=())
    assert not np.any(hamiltonian_at(p, 1.7).data)


def test_carrier_limit():
    p = FullIonParams(IonGateParams(1e-9, 0.01, 0.1, phi=0.4, n_max=3), pad=4, compensation="none")
    t = 2.3
    h = hamiltonian_at(p, t)
    amp = 0.01 * np.exp(0.4j)
    for n in range(4):
        assert h.element((DOWN, UP, n), (DOWN, DOWN, n)) == pytest.approx(amp * np.exp(-0.1j * t), abs=1e-12)
        assert h.element((UP, DOWN, n), (DOWN, DOWN, n)) == pytest.approx(amp * np.exp(-0.9j * t), abs=1e-12)
    off_fock = h.data.reshape(4, 8, 4, 8)[:, :4, :, :4].copy()
    for s in range(4):
        for q in range(4):
            np.fill_diagonal(off_fock[s, :, q, :], 0)
    assert np.max(np.abs(off_fock)) < 1e-10


# propagators ----------------------------------------------------------------------------


def test_closed_form_matches_sequential_product():
    t, k = 7.3, 40
    a = stepped_propagator(SMALL, t, k).data
    b = sequential_propagator(SMALL, t, k).data
    assert np.max(np.abs(a - b)) < 1e-12


def test_stepping_is_second_order():
    t = 40.0
    exact = rotating_frame_propagator(SMALL, t).data
    errs = [np.max(np.abs(stepped_propagator(SMALL, t, k).data - exact)) for k in (100, 200, 400)]
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_short_time_first_order_expansion():
    psi0 = StateVector.basis(SMALL.space, DOWN, DOWN, 1).amplitudes
    errs = []
    for dt in (0.04, 0.02, 0.01):
        step = stepped_propagator(SMALL, dt, 1).data @ psi0
        h = hamiltonian_at(SMALL, dt / 2).data
        errs.append(np.linalg.norm(step - (psi0 - 1j * dt * h @ psi0)))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_unitarity():
    t = 3.0e5
    assert rotating_frame_propagator(SMALL, t).unitarity_defect() < 1e-10
    assert stepped_propagator(SMALL, t, 20_000).unitarity_defect() < 1e-6


def test_propagate_without_beams_is_identity():
    p = FullIonParams(SMALL.base, pad=4, beams=(), t_final=123.0)
    psi0 = StateVector.normalized(
        HilbertSpace(qubit(), qubit(), fock(3)), np.arange(16) + 1j * np.arange(16)[::-1]
    )
    out = propagate(p, psi0)
    assert np.allclose(out.amplitudes.reshape(4, 8)[:, :4].ravel(), psi0.amplitudes, atol=1e-14)


def test_propagate_preserves_norm_and_converges():
    p = FullIonParams(SMALL.base, pad=4, t_final=500.0)
    out = propagate(p, gate_state(DOWN, DOWN, 3))
    assert abs(out.norm() - 1) < 1e-8


def test_convergence_failure_reports_diagnostics():
    p = FullIonParams(SMALL.base, pad=4, tol_conv=1e-30, dt=2 * math.pi / 50)
    probes = StateVector.basis(p.space, DOWN, DOWN, 0).amplitudes[:, None]
    with pytest.raises(ConvergenceError) as err:
        converged_propagator(p, 200.0, probes)
    diag = err.value.diagnostics
    assert len(diag) == 3
    k0 = math.ceil(200.0 / p.dt)
    assert [d[0] for d in diag] == pytest.approx([200.0 / (k0 * 2**i) for i in range(3)])


def test_halving_agreement():
    p = FullIonParams(SMALL.base, pad=4)
    probes = np.eye(p.space.dim)[:, :4]
    res = converged_propagator(p, 2000.0, probes)
    assert res.diagnostics[-1][1] < 1e-6


def test_beam_on_ion_j_off_leaves_ion_j_alone():
    p = FullIonParams(SMALL.base, pad=4, beams=("II",), t_final=800.0)
    sp = HilbertSpace(qubit(), qubit(), fock(3))
    amps = np.zeros(sp.dim, dtype=complex)
    amps[sp.index(DOWN, DOWN, 0)] = 1.0
    amps[sp.index(UP, DOWN, 1)] = 0.5j
    amps[sp.index(DOWN, UP, 0)] = 0.7
    psi0 = StateVector.normalized(sp, amps)
    start = [0.0, 0.0]
    for idx in range(16):
        start[psi0.space.labels(idx)[0]] += abs(psi0.amplitudes[idx]) ** 2
    out = propagate(p, psi0)
    pops = (np.abs(out.amplitudes) ** 2).reshape(2, -1).sum(axis=1)
    assert np.allclose(pops, start, atol=1e-8)


# validation against the effective model ------------------------------------------------------


def test_no_beams_gives_quarter_fidelity():
    rep = validate_effective(FullIonParams(IonGateParams(0.1, 0.01, 0.1), beams=()))
    assert rep.gate_fidelity == pytest.approx(0.25, abs=1e-12)
    assert rep.state_fidelities == pytest.approx((1.0, 1.0, 1.0, 1.0))


def test_calibration_reaches_resonance():
    res = calibrate_resonance(FullIonParams(IonGateParams(0.1, 0.02, 0.1)))
    assert res.mismatch <= 1e-12 * res.coupling
    assert res.coupling == pytest.approx(
        validate_effective(FullIonParams(IonGateParams(0.1, 0.02, 0.1))).omega_eff, rel=0.2
    )


@pytest.mark.slow
def test_deep_dispersive_point_is_better():
    deep = validate_effective(FullIonParams(IonGateParams(0.05, 0.002, 0.04)))
    with pytest.warns(DispersiveRegimeWarning):
        shallow = validate_effective(FullIonParams(IonGateParams(0.05, 0.01, 0.04)))
    assert deep.gate_fidelity > shallow.gate_fidelity
    assert deep.gate_fidelity > 0.99


def test_fidelities_independent_of_phase():
    ref = validate_effective(FullIonParams(IonGateParams(0.1, 0.02, 0.1)))
    rot = validate_effective(FullIonParams(IonGateParams(0.1, 0.02, 0.1, phi=1.3)))
    assert abs(ref.gate_fidelity - rot.gate_fidelity) < 1e-6
    assert np.allclose(ref.state_fidelities, rot.state_fidelities, atol=1e-6)


def test_padding_insensitive():
    a = validate_effective(FullIonParams(IonGateParams(0.1, 0.02, 0.1), pad=10))
    b = validate_effective(FullIonParams(IonGateParams(0.1, 0.02, 0.1), pad=14))
    assert abs(a.gate_fidelity - b.gate_fidelity) < 1e-8
    assert np.max(np.abs(np.subtract(a.state_fidelities, b.state_fidelities))) < 1e-8
    assert np.max(np.abs(np.subtract(a.leakage, b.leakage))) < 1e-8


def test_dispersive_sweep_monotone():
    reports, verdict = dispersive_sweep(IonGateParams(0.1, 0.01, 0.1))
    assert verdict is True
    assert [r.ratio for r in reports] == pytest.approx([0.2, 0.1, 0.05])
    assert all(r.convergence[-1][1] < 1e-6 for r in reports)


def test_strictly_decreasing():
    assert strictly_decreasing([3, 2, 1])
    assert not strictly_decreasing([3, 3, 1])
    assert strictly_decreasing([1])
