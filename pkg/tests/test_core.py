import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpgsim.core import (
    HilbertSpace,
    Operator,
    StateVector,
    annihilation,
    evolve,
    expm_unitary,
    fock,
    identity,
    number,
    operator,
    projector,
    qubit,
    sigma_x,
    state_fidelity,
    subspace_overlap,
    tensor,
)
from qpgsim.errors import (
    HermiticityError,
    InvalidTruncationError,
    NotAProjectorError,
    SpaceMismatchError,
)

Q = HilbertSpace(qubit())


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


# tensor -------------------------------------------------------------------


def test_identity_tensor_identity():
    out = tensor(identity(Q), identity(Q))
    assert np.array_equal(out.data, np.eye(4))
    assert out.space.dims == (2, 2)


def test_leftmost_factor_flips():
    x_i = tensor(sigma_x(), identity(Q))
    psi = StateVector.basis(x_i.space, 0, 0)
    out = x_i @ psi
    assert out.population(1, 0) == pytest.approx(1.0)


def test_tensor_entry_layout():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(2, 2)), rng.normal(size=(3, 3))
    out = tensor(operator(qubit(), a), operator(fock(2), b)).data
    for i, j, m, n in np.ndindex(2, 2, 3, 3):
        assert out[i * 3 + m, j * 3 + n] == a[i, j] * b[m, n]


def test_tensor_associative():
    rng = np.random.default_rng(2)
    ints = [rng.integers(-9, 10, size=(d, d)) for d in (2, 3, 2)]
    a, b, c = (operator(f, m) for f, m in zip((qubit(), fock(2), qubit()), ints))
    # integer entries: every product is exact, so the layouts must agree bit for bit
    assert np.array_equal(tensor(tensor(a, b), c).data, tensor(a, tensor(b, c)).data)
    assert tensor(tensor(a, b), c).space == tensor(a, tensor(b, c)).space
    reals = [operator(f, rng.normal(size=(d, d))) for f, d in ((qubit(), 2), (fock(2), 3), (qubit(), 2))]
    left = tensor(tensor(*reals[:2]), reals[2]).data
    right = tensor(reals[0], tensor(*reals[1:])).data
    assert np.max(np.abs(left - right)) < 1e-15


def test_space_indexing_row_major():
    sp = HilbertSpace(qubit(), qubit(), fock(4))
    assert sp.index(1, 0, 3) == (2 * 1 + 0) * 5 + 3
    assert sp.labels(sp.index(0, 1, 2)) == (0, 1, 2)


# ladder operators -----------------------------------------------------------


def test_annihilation_smallest():
    assert np.array_equal(annihilation(1).data, [[0, 1], [0, 0]])


def test_annihilation_elements():
    a = annihilation(6).data
    for n in range(1, 7):
        assert a[n - 1, n] == pytest.approx(math.sqrt(n))
    mask = np.ones_like(a, dtype=bool)
    mask[np.arange(6), np.arange(1, 7)] = False
    assert np.all(a[mask] == 0)


def test_number_diagonal():
    a = annihilation(5)
    assert np.allclose(np.diag((a.dag() @ a).data), np.arange(6))
    assert np.array_equal(np.diag(number(5).data).real, np.arange(6))


def test_commutator_defect_only_at_top():
    a = annihilation(5)
    comm = (a @ a.dag() - a.dag() @ a).data
    expected = np.eye(6)
    expected[5, 5] = -5
    assert np.allclose(comm, expected)


def test_annihilation_rejects_small_truncation():
    with pytest.raises(InvalidTruncationError):
        annihilation(0)


# exponentials ----------------------------------------------------------------


def test_expm_at_zero_time():
    h = Operator(HilbertSpace(fock(3)), random_hermitian(np.random.default_rng(3), 4))
    assert np.allclose(expm_unitary(h, 0.0).data, np.eye(4), atol=1e-14)


def test_expm_diagonal():
    h = operator(qubit(), np.diag([0.3, -1.7]))
    t = 2.5
    assert np.allclose(expm_unitary(h, t).data, np.diag(np.exp(-1j * np.array([0.3, -1.7]) * t)), atol=1e-14)


def test_expm_rabi_transfer():
    omega = 0.37
    u = expm_unitary(sigma_x() * omega, math.pi / (2 * omega))
    out = u @ StateVector.basis(Q, 0)
    assert out.population(1) == pytest.approx(1.0, abs=1e-12)


def test_expm_accuracy_independent_of_time():
    # a huge phase stays exact because only eigenvalues are exponentiated
    h = operator(qubit(), np.diag([1.0, -1.0]))
    t = 1e6 * math.pi
    assert np.allclose(np.diag(expm_unitary(h, t).data), [1.0, 1.0], atol=1e-9)


def test_expm_rejects_non_hermitian():
    with pytest.raises(HermiticityError):
        expm_unitary(operator(qubit(), [[0, 1], [0, 0]]), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-50, 50), st.floats(-50, 50))
def test_expm_group_law(seed, t1, t2):
    rng = np.random.default_rng(seed)
    h = Operator(HilbertSpace(fock(4)), random_hermitian(rng, 5))
    u12 = expm_unitary(h, t1 + t2).data
    assert np.max(np.abs(u12 - expm_unitary(h, t1).data @ expm_unitary(h, t2).data)) < 1e-10
    assert expm_unitary(h, t1).unitarity_defect() < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-100, 100))
def test_expm_adjoint_is_time_reversal(seed, t):
    rng = np.random.default_rng(seed)
    h = Operator(HilbertSpace(fock(3)), random_hermitian(rng, 4))
    assert np.max(np.abs(expm_unitary(h, t).dag().data - expm_unitary(h, -t).data)) < 1e-10


# states and fidelities -----------------------------------------------------------


def test_state_requires_normalisation():
    with pytest.raises(ValueError):
        StateVector(Q, [1.0, 1.0])


def test_evolve_identity_and_flip():
    psi = StateVector.normalized(Q, [0.6, 0.8j])
    assert np.allclose(evolve(identity(Q), psi).amplitudes, psi.amplitudes)
    assert evolve(sigma_x(), StateVector.basis(Q, 0)).population(1) == 1.0


def test_evolve_space_mismatch():
    with pytest.raises(SpaceMismatchError):
        evolve(identity(HilbertSpace(fock(1))), StateVector.basis(Q, 0))


def test_evolve_rejects_non_unitary():
    with pytest.raises(ValueError):
        evolve(operator(qubit(), np.diag([1.0, 0.5])), StateVector.basis(Q, 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_evolve_preserves_norm(seed):
    rng = np.random.default_rng(seed)
    sp = HilbertSpace(qubit(), fock(3))
    psi = StateVector.normalized(sp, rng.normal(size=8) + 1j * rng.normal(size=8))
    out = Operator(sp, random_unitary(rng, 8)) @ psi
    assert abs(out.norm() - 1) < 1e-10


def test_fidelity_examples():
    zero, one = StateVector.basis(Q, 0), StateVector.basis(Q, 1)
    plus = StateVector.normalized(Q, [1, 1])
    assert state_fidelity(zero, zero) == pytest.approx(1.0)
    assert state_fidelity(zero, one) == 0.0
    assert state_fidelity(zero, plus) == pytest.approx(0.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_fidelity_symmetric_and_unitarily_invariant(seed):
    rng = np.random.default_rng(seed)
    sp = HilbertSpace(fock(5))
    a = StateVector.normalized(sp, rng.normal(size=6) + 1j * rng.normal(size=6))
    b = StateVector.normalized(sp, rng.normal(size=6) + 1j * rng.normal(size=6))
    u = Operator(sp, random_unitary(rng, 6))
    f = state_fidelity(a, b)
    assert f == pytest.approx(state_fidelity(b, a), abs=1e-14)
    assert abs(state_fidelity(u @ a, u @ b) - f) < 1e-10


def test_fidelity_space_mismatch():
    with pytest.raises(SpaceMismatchError):
        state_fidelity(StateVector.basis(Q, 0), StateVector.basis(HilbertSpace(fock(1)), 0))


def test_subspace_overlap_examples():
    rng = np.random.default_rng(5)
    sp = HilbertSpace(qubit(), qubit())
    u = Operator(sp, random_unitary(rng, 4))
    full = identity(sp)
    assert subspace_overlap(u, u, full) == pytest.approx(1.0)
    assert subspace_overlap(u * np.exp(0.7j), u, full) == pytest.approx(1.0)
    rot = operator(qubit(), [[0, -1], [1, 0]])
    rank1 = projector(Q, [(0,)])
    assert subspace_overlap(rot, identity(Q), rank1) == pytest.approx(0.0, abs=1e-15)


def test_subspace_overlap_rejects_non_projector():
    with pytest.raises(NotAProjectorError):
        subspace_overlap(identity(Q), identity(Q), operator(qubit(), np.diag([1.0, 0.5])))


def test_operator_is_immutable():
    op = identity(Q)
    with pytest.raises(ValueError):
        op.data[0, 0] = 2.0
