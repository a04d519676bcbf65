"""Extended-precision helpers for propagators over very long times.

Gate times in the dispersive regime reach 1e7 trap periods.  A double
precision eigenvalue carries an absolute error of roughly ``eps * ||H||``,
and that error is multiplied by ``t`` in the phase ``exp(-i w t)``.
Eigenvector errors, by contrast, enter the propagator only once.  So the
eigensystem from LAPACK is kept and only polished: the vectors get a
first-order correction and the eigenvalues are recomputed as Rayleigh
quotients, both in ``np.longdouble``.

On platforms where ``longdouble`` is plain double this degrades to the
ordinary computation.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

LD = np.clongdouble


def _orthonormalize(z: np.ndarray) -> np.ndarray:
    # Newton-Schulz step towards the polar factor; z is already unitary to O(eps)
    eye = np.eye(z.shape[1], dtype=LD)
    for _ in range(2):
        z = z @ (1.5 * eye - 0.5 * (z.conj().T @ z))
    return z


def polar_factor(b: np.ndarray, iters: int = 60) -> np.ndarray:
    """Unitary polar factor of a well-conditioned square matrix (Newton-Schulz)."""
    z = np.asarray(b, dtype=LD)
    z = z / np.longdouble(np.linalg.norm(np.asarray(z, dtype=complex), 2))
    eye = np.eye(z.shape[1], dtype=LD)
    for _ in range(iters):
        nxt = z @ (1.5 * eye - 0.5 * (z.conj().T @ z))
        if float(np.max(np.abs(nxt - z))) < 1e-19:
            return nxt
        z = nxt
    return z


def refine_eigensystem(m: np.ndarray, z: np.ndarray):
    """Polish approximate eigenvectors ``z`` of the normal matrix ``m``.

    Returns ``(eigenvalues, vectors)`` in extended precision.  Pairs whose
    separation is not large compared with the residual coupling are treated
    as degenerate and left unmixed.
    """
    m = np.asarray(m, dtype=LD)
    z = _orthonormalize(np.asarray(z, dtype=LD))
    mm = z.conj().T @ m @ z
    d = np.diag(mm).copy()
    off = mm - np.diag(d)
    gap = d[None, :] - d[:, None]
    ok = np.abs(gap) > 1e3 * np.abs(off)
    np.fill_diagonal(ok, False)
    c = np.zeros_like(mm)
    c[ok] = off[ok] / gap[ok]
    z = _orthonormalize(z @ (np.eye(len(d), dtype=LD) + c))
    w = np.einsum("ij,ij->j", z.conj(), m @ z)
    return w, z


def hermitian_evolution(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` with eigenvalues polished in extended precision."""
    _, v = np.linalg.eigh(h)
    w, z = refine_eigensystem(h, v)
    phase = np.exp(-1j * w.real * np.longdouble(t))
    return ((z * phase) @ z.conj().T).astype(complex)


def expm_small(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` in extended precision by Taylor series with squaring.

    Meant for short steps; ``h`` is any square matrix.
    """
    x = -1j * np.asarray(h, dtype=LD) * np.longdouble(t)
    norm = float(np.max(np.sum(np.abs(x), axis=1), initial=0.0))
    s = max(0, int(np.ceil(np.log2(norm / 0.25))) if norm > 0.25 else 0)
    x = x / (2**s)
    eye = np.eye(x.shape[0], dtype=LD)
    out, term = eye.copy(), eye.copy()
    for k in range(1, 30):
        term = term @ x / k
        out = out + term
        if float(np.max(np.abs(term))) < 1e-22:
            break
    for _ in range(s):
        out = out @ out
    return out


def unitary_power(g: np.ndarray, k: int) -> np.ndarray:
    """``g**k`` for a unitary ``g`` given in extended precision."""
    if k == 0:
        return np.eye(g.shape[0], dtype=LD)
    _, z = scipy.linalg.schur(np.asarray(g, dtype=complex), output="complex")
    lam, z = refine_eigensystem(g, z)
    phase = np.exp(1j * np.angle(lam) * np.longdouble(k))
    return (z * phase) @ z.conj().T
