"""Gamma/Beta evaluation and Gauss-Jacobi quadrature rules.

Every weakly singular integral in the derivative engine is discretized with
rules generated here: a Jacobi weight (1-s)^a (1+s)^b absorbs the algebraic
endpoint singularities so the remaining factor is smooth (for the built-in
function class, polynomial — hence integrated exactly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError


def gamma(x: float) -> float:
    """Gamma function for x > 0 or non-integer x; poles raise DomainError."""
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"gamma pole at non-positive integer {x!r}")
    return math.gamma(x)


def beta(p: float, q: float) -> float:
    """Beta function B(p, q) for p, q > 0, computed through log-gamma."""
    if p <= 0 or q <= 0:
        raise DomainError(f"beta requires positive arguments, got ({p!r}, {q!r})")
    return math.exp(math.lgamma(p) + math.lgamma(q) - math.lgamma(p + q))


@dataclass(frozen=True)
class JacobiRule:
    """Gauss-Jacobi rule for the weight (1-s)^a_exp (1+s)^b_exp on [-1, 1].

    nodes are strictly increasing in (-1, 1); weights are positive and sum to
    the weight mass 2^(a+b+1) B(a+1, b+1). Immutable, safe to share.
    """

    n: int
    a_exp: float
    b_exp: float
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f) -> float:
        """Integral of f against the weight: sum_i w_i f(s_i)."""
        return float(np.dot(self.weights, f(self.nodes)))

    @property
    def weight_mass(self) -> float:
        return 2.0 ** (self.a_exp + self.b_exp + 1) * beta(self.a_exp + 1, self.b_exp + 1)


@lru_cache(maxsize=512)
def jacobi_rule(n: int, a_exp: float, b_exp: float) -> JacobiRule:
    """n-point Gauss-Jacobi rule by Golub-Welsch eigen-decomposition.

    The symmetric tridiagonal matrix is assembled from the three-term
    recurrence coefficients of the monic Jacobi polynomials; eigenvalues give
    the nodes and the squared first eigenvector components (times the weight
    mass) give the weights.
    """
    if n < 1:
        raise DomainError(f"node count must be >= 1, got {n}")
    if a_exp <= -1 or b_exp <= -1:
        raise DomainError(
            f"Jacobi exponents must exceed -1 for integrability, got ({a_exp!r}, {b_exp!r})"
        )
    a, b = float(a_exp), float(b_exp)
    ab = a + b

    diag = np.zeros(n)
    diag[0] = (b - a) / (ab + 2.0)
    if n > 1:
        k = np.arange(1, n, dtype=float)
        diag[1:] = (b * b - a * a) / ((2 * k + ab) * (2 * k + ab + 2.0))

    # Off-diagonal: sqrt(beta_k); k=1 needs its own formula (the generic one
    # is 0/0 when a+b = -1, e.g. the Chebyshev weight).
    off = np.zeros(n - 1)
    if n > 1:
        off[0] = math.sqrt(4.0 * (a + 1) * (b + 1) / ((ab + 2.0) ** 2 * (ab + 3.0)))
    if n > 2:
        k = np.arange(2, n, dtype=float)
        nk = 2 * k + ab
        off[1:] = np.sqrt(4.0 * k * (k + a) * (k + b) * (k + ab) / (nk * nk * (nk + 1) * (nk - 1)))

    jac = np.diag(diag)
    if n > 1:
        jac += np.diag(off, 1) + np.diag(off, -1)
    eigvals, eigvecs = np.linalg.eigh(jac)

    mass = 2.0 ** (ab + 1) * beta(a + 1, b + 1)
    weights = mass * eigvecs[0, :] ** 2
    nodes = eigvals

    nodes.setflags(write=False)
    weights.setflags(write=False)
    return JacobiRule(n=n, a_exp=a, b_exp=b, nodes=nodes, weights=weights)
