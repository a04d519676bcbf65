"""Laguerre polynomials, Lamb-Dicke factors and the quadrature exponential."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Operator, annihilation, expm_unitary, fock, operator
from .errors import ParameterError


@dataclass(frozen=True)
class LambDickeContext:
    """Lamb-Dicke parameter plus the Fock truncation it is evaluated on.

    ``pad`` extra levels are used internally wherever an operator must be
    exponentiated on a truncated oscillator and then cropped.
    """

    eta: float
    n_max: int
    pad: int = 10

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ParameterError(f"eta must lie in (0, 1), got {self.eta}")
        if self.n_max < 1:
            raise ParameterError(f"n_max must be >= 1, got {self.n_max}")
        if self.pad < 4:
            raise ParameterError(f"pad must be >= 4, got {self.pad}")


def laguerre(n: int, k: int, x: float) -> float:
    """Generalised Laguerre polynomial ``L_n^k(x)`` by upward recurrence."""
    if n < 0 or k < 0 or x < 0:
        raise ValueError("laguerre requires n, k, x >= 0")
    if n == 0:
        return 1.0
    prev, cur = 1.0, 1.0 + k - x
    for m in range(2, n + 1):
        prev, cur = cur, ((2 * m - 1 + k - x) * cur - (m - 1 + k) * prev) / m
    return cur


def factorial_ratio(n: int, k: int) -> float:
    """``n! / (n + k)!`` as a running product."""
    r = 1.0
    for m in range(n + 1, n + k + 1):
        r /= m
    return r


def f_factor(n: int, k: int, eta: float) -> float:
    """``exp(-eta^2/2) n!/(n+k)! L_n^k(eta^2)``, the k-th sideband weight at level n."""
    if not 0.0 < eta < 1.0:
        raise ParameterError(f"eta must lie in (0, 1), got {eta}")
    return math.exp(-0.5 * eta * eta) * factorial_ratio(n, k) * laguerre(n, k, eta * eta)


def f_diagonal(k: int, eta: float, n_max: int) -> np.ndarray:
    return np.array([f_factor(n, k, eta) for n in range(n_max + 1)])


def build_F(k: int, ctx: LambDickeContext) -> Operator:
    """Diagonal operator ``sum_n f_k(n) |n><n|`` on Fock(n_max)."""
    return operator(fock(ctx.n_max), np.diag(f_diagonal(k, ctx.eta, ctx.n_max)))


def quadrature_exponential(ctx: LambDickeContext) -> Operator:
    """``exp(i eta (a + a^+))`` on Fock(n_max).

    Exponentiated on Fock(n_max + pad) and cropped, so matrix elements near
    the top of the padded space (where truncation bites) are discarded.
    """
    big = ctx.n_max + ctx.pad
    a = annihilation(big)
    quad = a + a.dag()
    # exp(-i h t) with h = quad, t = -eta
    full = expm_unitary(quad, -ctx.eta)
    m = ctx.n_max + 1
    return operator(fock(ctx.n_max), full.data[:m, :m])
