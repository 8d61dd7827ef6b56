"""Fractional derivative engine.

Computes the modified Riemann-Liouville derivative of order alpha in (0,1),

    D^a f(t) = (1/Gamma(1-a)) d/dt  int_0^t (t-x)^(-a) (f(x) - f(0)) dx,

for continuous piecewise-smooth functions, by three mutually checking
methods:

* symbolic: exact term-wise rule on shifted-power sums,
  c (x-b)^p  ->  c Gamma(p+1)/Gamma(p+1-a) (t-b)^(p-a) for t > b;
* quadrature: the equivalent form (1/Gamma(1-a)) int_0^t (t-x)^(-a) f'(x) dx
  (valid for continuous piecewise-C1 f with integrable derivative),
  discretized with Gauss-Jacobi rules whose weights absorb both the kernel
  exponent -a and the integrand's endpoint singularities;
* oracle: one-sided finite differences of the raw defining integral with
  Richardson extrapolation, independent of the other two paths.

At a breakpoint the derivative is the two-sided merge of one-sided limits;
when the limits disagree beyond the merge tolerance the result reports a
mismatch instead of a number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotRepresentableError, StepCollisionError
from .piecewise import (
    LEFT,
    RIGHT,
    PiecewiseFn,
    _close,
    _fit_leading,
    _is_int,
    expr_deriv,
    expr_eval,
)
from .special import gamma, jacobi_rule

SYMBOLIC = "symbolic"
QUADRATURE = "quadrature"
ORACLE = "oracle"


@dataclass(frozen=True)
class FracOrder:
    """Derivative order, restricted to the open interval (0, 1)."""

    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"order must lie in (0, 1), got {self.alpha!r}")

    def __float__(self) -> float:
        return self.alpha


@dataclass(frozen=True)
class EngineConfig:
    """Engine tunables; the defaults satisfy the acceptance tolerances."""

    nodes: int = 64           # Gauss-Jacobi nodes per subinterval
    merge_tol: float = 1e-6   # |left - right| below which the limits merge
    oracle_step: float = 1e-3


DEFAULT_CONFIG = EngineConfig()


@dataclass(frozen=True)
class FracDerivResult:
    """Value of D^a f at a point with one-sided limits.

    value is populated only when the limits agree within the merge
    tolerance; err_estimate is 0 for the symbolic path, the node-doubling
    difference for quadrature, and the extrapolation residual for the
    oracle.
    """

    point: float
    alpha: FracOrder
    left_limit: float
    right_limit: float
    value: float | None
    method: str
    err_estimate: float

    @property
    def mismatch(self) -> bool:
        return self.value is None


def _merged(point, alpha, left, right, method, err, config) -> FracDerivResult:
    tol = config.merge_tol * max(1.0, abs(left), abs(right))
    if math.isfinite(left) and math.isfinite(right) and abs(left - right) <= tol:
        value = 0.5 * (left + right)
    else:
        value = None
    return FracDerivResult(point, FracOrder(alpha), left, right, value, method, err)


def _one_sided(point, alpha, limit, method, err) -> FracDerivResult:
    value = limit if math.isfinite(limit) else None
    return FracDerivResult(point, FracOrder(alpha), limit, limit, value, method, err)


# --------------------------------------------------------------------------
# quadrature plan
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Subinterval:
    lo: float
    hi: float
    a_exp: float  # exponent of (hi - x): -alpha on the cell touching t
    b_exp: float  # exponent of (x - lo) from the integrand's singularity tag
    nodes: int


@dataclass(frozen=True)
class QuadratureSpec:
    """Breakpoint cells of [0, t] with their Jacobi exponents."""

    t: float
    alpha: float
    subintervals: tuple


def _cells(f: PiecewiseFn, t: float):
    cuts = [0.0]
    for b in f.breakpoints[1:-1]:
        if b < t and not _close(b, t):
            cuts.append(b)
    cuts.append(t)
    return list(zip(cuts[:-1], cuts[1:]))


def build_quadrature_spec(
    f: PiecewiseFn, alpha: float, t: float, config: EngineConfig | None = None
) -> QuadratureSpec:
    """Subdivision plan for the Caputo-form integral over [0, t]."""
    config = config or DEFAULT_CONFIG
    alpha = float(FracOrder(float(alpha)).alpha)
    t = f._snap_to_breakpoint(f._check_domain(t))
    subs = []
    for lo, hi in _cells(f, t):
        tag = f.derivative_singularity(lo, RIGHT)
        b_exp = tag.exponent if tag is not None else 0.0
        a_exp = -alpha if _close(hi, t) else 0.0
        subs.append(Subinterval(lo, hi, a_exp, b_exp, config.nodes))
    return QuadratureSpec(t=t, alpha=alpha, subintervals=tuple(subs))


# --------------------------------------------------------------------------
# weighted integration machinery
# --------------------------------------------------------------------------

def _graded_cuts(a: float, b: float, dist_left: float, dist_right: float):
    """Partition [a, b] so no part outruns its distance to an outside
    singularity (geometric halving toward the near end)."""
    cuts = [a, b]
    length = b - a
    k = 0
    while length > 2.0 * dist_right and k < 60:
        length *= 0.5
        cuts.insert(-1, b - length)
        k += 1
    first_end = cuts[1]
    seg = first_end - a
    extra = []
    k = 0
    while seg > 2.0 * dist_left and k < 60:
        seg *= 0.5
        extra.append(a + seg)
        k += 1
    return [a] + sorted(extra) + cuts[1:]


def _run_cells(cuts, anchor, b_exp, residual, t, alpha, n):
    """sum of int_u^v (t-x)^(-alpha) (x-anchor)^(b_exp) residual(x) dx.

    residual excludes both the kernel and the anchored factor. The kernel
    goes into the Jacobi weight on the cell touching t and the anchored
    factor into the weight on the cell touching the anchor; elsewhere the
    excluded factors are restored pointwise (where they are analytic).
    """
    total = 0.0
    for u, v in zip(cuts[:-1], cuts[1:]):
        a_w = -alpha if _close(v, t) else 0.0
        b_w = b_exp if u == cuts[0] and anchor is not None and _close(u, anchor) else 0.0
        rule = jacobi_rule(n, a_w, b_w)
        half = 0.5 * (v - u)
        xs = 0.5 * (u + v) + half * rule.nodes
        vals = residual(xs)
        if b_exp != 0.0 and anchor is not None and b_w == 0.0:
            vals = vals * (xs - anchor) ** b_exp
        if a_w == 0.0:
            vals = vals * (t - xs) ** (-alpha)
        total += half ** (a_w + b_w + 1.0) * float(np.dot(rule.weights, vals))
    return total


def _integrate_terms_on_cell(terms, a, b, t, alpha, n):
    """int_a^b (t-x)^(-alpha) * sum d (x-s)^e dx for anchored terms s <= a.

    Terms anchored exactly at a with fractional exponent are grouped by
    their fractional class and integrated with an exponent-matched weight
    (exact); the rest is smooth on the open cell and integrated on a
    graded partition.
    """
    final = _close(b, t)
    dist_kernel = math.inf if final else (t - b)
    groups: dict = {}
    smooth = []
    for d, s, e in terms:
        if d == 0.0:
            continue
        if _close(s, a) and not _is_int(e):
            key = round(e - math.floor(e), 9)
            groups.setdefault(key, []).append((d, e))
        else:
            smooth.append((d, s, e))

    total = 0.0
    for items in groups.values():
        base = min(e for _, e in items)
        rel = [(d, round(e - base)) for d, e in items]

        def poly(xs, rel=rel):
            out = np.zeros_like(xs)
            for d, k in rel:
                out += d * (xs - a) ** k
            return out

        cuts = _graded_cuts(a, b, math.inf, dist_kernel)
        total += _run_cells(cuts, a, base, poly, t, alpha, n)

    if smooth:
        frac_pts = [s for _, s, e in smooth if not _is_int(e) and s < a - 1e-15]
        dist_left = a - max(frac_pts) if frac_pts else math.inf

        def g(xs):
            out = np.zeros_like(xs)
            for d, s, e in smooth:
                out += d * (xs - s) ** e
            return out

        cuts = _graded_cuts(a, b, dist_left, dist_kernel)
        total += _run_cells(cuts, None, 0.0, g, t, alpha, n)
    return total


def _integrate_callable_on_cell(f, a, b, t, alpha, n, raw, b_exp):
    """Tree-path cell integral of kernel * raw over [a, b]."""
    final = _close(b, t)
    dist_kernel = math.inf if final else (t - b)
    below = [p for p in f.breakpoints if p < a - 1e-15]
    dist_left = a - max(below) if below else math.inf

    def residual(xs):
        vals = np.array([raw(float(x)) for x in xs])
        if b_exp != 0.0:
            vals = vals / (xs - a) ** b_exp
        return vals

    cuts = _graded_cuts(a, b, dist_left, dist_kernel)
    return _run_cells(cuts, a, b_exp, residual, t, alpha, n)


def _caputo_value(f: PiecewiseFn, alpha: float, t: float, n: int) -> float:
    """Left limit at t of the Caputo-form integral, times 1/Gamma(1-alpha)."""
    if t <= 1e-300:
        return 0.0
    ps = f.flatten()
    total = 0.0
    for a, b in _cells(f, t):
        if ps is not None:
            terms = [
                (c * p, s, p - 1.0)
                for c, s, p in ps.terms
                if s < a + 1e-15 or _close(s, a)
            ]
            total += _integrate_terms_on_cell(terms, a, b, t, alpha, n)
        else:
            i = f.piece_index(a, RIGHT)
            piece, lo = f.pieces[i], f.breakpoints[i]
            raw = lambda x, piece=piece, lo=lo: expr_deriv(piece, x, lo, RIGHT)
            tag = f.derivative_singularity(a, RIGHT)
            b_exp = tag.exponent if tag is not None else 0.0
            total += _integrate_callable_on_cell(f, a, b, t, alpha, n, raw, b_exp)
    return total / gamma(1.0 - alpha)


def _h_value(f: PiecewiseFn, alpha: float, s: float, n: int) -> float:
    """H(s) = int_0^s (s-x)^(-alpha) (f(x) - f(0)) dx by singular quadrature."""
    if s <= 1e-300:
        return 0.0
    ps = f.flatten()
    f0 = f.value_at_0
    total = 0.0
    for a, b in _cells(f, s):
        if ps is not None:
            terms = [
                (c, sh, p)
                for c, sh, p in ps.terms
                if sh < a + 1e-15 or _close(sh, a)
            ]
            total += _integrate_terms_on_cell(terms, a, b, s, alpha, n)
        else:
            raw = lambda x: f.eval(x) - f0
            total += _integrate_callable_on_cell(f, a, b, s, alpha, n, raw, 0.0)
    return total


# --------------------------------------------------------------------------
# jump across a breakpoint (right limit = left limit + jump)
# --------------------------------------------------------------------------

def _jump_from_order(q: float, c: float, alpha: float) -> float:
    if q == math.inf or c == 0.0:
        return 0.0
    if q > alpha + 1e-9:
        return 0.0
    if abs(q - alpha) <= 1e-9:
        return c * gamma(q + 1.0)
    return math.copysign(math.inf, c)


def _jump(f: PiecewiseFn, alpha: float, t: float) -> float:
    """Limit contribution of terms that switch on exactly at t."""
    ps = f.flatten()
    if ps is not None:
        total = 0.0
        for c, s, p in ps.terms:
            if _close(s, t):
                total += _jump_from_order(p, c, alpha)
        return total
    if _close(t, f.domain_end):
        return 0.0
    if t == 0.0:
        f0 = f.value_at_0
        h = lambda eps: f.eval(eps) - f0
        gap = f.breakpoints[1]
    else:
        i = f.piece_index(t, LEFT)
        piece, lo = f.pieces[i], f.breakpoints[i]
        h = lambda eps: f.eval(t + eps) - expr_eval(piece, t + eps, lo)
        j = f.piece_index(t, RIGHT)
        gap = f.breakpoints[j + 1] - t
    scale = max(1.0, abs(f.eval(t)))
    q, c = _fit_leading(h, scale, eps0=min(1e-3, gap / 20.0))
    if q == math.inf:
        return 0.0
    if q > alpha + 0.02:
        return 0.0
    if abs(q - alpha) <= 0.02:
        return c * gamma(alpha + 1.0)
    return math.copysign(math.inf, c)


# --------------------------------------------------------------------------
# the three methods
# --------------------------------------------------------------------------

def _symbolic_limits(f: PiecewiseFn, alpha: float, t: float):
    ps = f.flatten()
    if ps is None:
        raise NotRepresentableError(
            "function does not flatten to a shifted-power sum; use the quadrature path"
        )
    left = 0.0
    jump = 0.0
    for c, b, p in ps.terms:
        if _close(b, t):
            if not _close(t, f.domain_end):
                jump += _jump_from_order(p, c, alpha)
        elif b < t:
            left += c * gamma(p + 1.0) / gamma(p + 1.0 - alpha) * (t - b) ** (p - alpha)
    return left, left + jump


def frac_deriv_symbolic(
    f: PiecewiseFn,
    alpha: float,
    t: float,
    side: str | None = None,
    config: EngineConfig | None = None,
) -> FracDerivResult:
    """Exact term-wise power rule; requires a shifted-power-sum function."""
    config = config or DEFAULT_CONFIG
    alpha = FracOrder(float(alpha)).alpha
    t = f._snap_to_breakpoint(f._check_domain(t))
    left, right = _symbolic_limits(f, alpha, t)
    if t == 0.0:
        left = right
    if side == LEFT:
        return _one_sided(t, alpha, left, SYMBOLIC, 0.0)
    if side == RIGHT:
        return _one_sided(t, alpha, right, SYMBOLIC, 0.0)
    return _merged(t, alpha, left, right, SYMBOLIC, 0.0, config)


def frac_deriv_quadrature(
    f: PiecewiseFn,
    alpha: float,
    t: float,
    side: str | None = None,
    config: EngineConfig | None = None,
) -> FracDerivResult:
    """Gauss-Jacobi discretization of the Caputo-equivalent integral."""
    config = config or DEFAULT_CONFIG
    alpha = FracOrder(float(alpha)).alpha
    t = f._snap_to_breakpoint(f._check_domain(t))
    n = config.nodes
    coarse = _caputo_value(f, alpha, t, n)
    fine = _caputo_value(f, alpha, t, 2 * n)
    err = abs(fine - coarse)
    left = fine
    jump = _jump(f, alpha, t) if (t == 0.0 or f.is_breakpoint(t)) else 0.0
    right = left + jump
    if t == 0.0:
        left = right
    if side == LEFT:
        return _one_sided(t, alpha, left, QUADRATURE, err)
    if side == RIGHT:
        return _one_sided(t, alpha, right, QUADRATURE, err)
    return _merged(t, alpha, left, right, QUADRATURE, err, config)


def _oracle_one_side(f, alpha, t, side, h, n):
    bps = f.breakpoints
    if side == RIGHT:
        ahead = [b for b in bps if b > t + 1e-15]
        clearance = (min(ahead) if ahead else t) - t
    else:
        behind = [b for b in bps if b < t - 1e-15]
        clearance = t - (max(behind) if behind else t)
    if clearance < 4.0 * h - 1e-15:
        raise StepCollisionError(
            f"stencil of width 4h = {4 * h:.3g} collides with a breakpoint "
            f"(clearance {clearance:.3g} on the {side} of {t!r})"
        )
    ht = _h_value(f, alpha, t, n)
    sgn = 1.0 if side == RIGHT else -1.0

    def d1(s):
        return sgn * (_h_value(f, alpha, t + sgn * s, n) - ht) / s

    t00, t01, t02 = d1(h), d1(h / 2.0), d1(h / 4.0)
    t11 = 2.0 * t01 - t00
    t12 = 2.0 * t02 - t01
    t22 = (4.0 * t12 - t11) / 3.0
    g1 = gamma(1.0 - alpha)
    return t22 / g1, abs(t22 - t12) / g1


def frac_deriv_oracle(
    f: PiecewiseFn,
    alpha: float,
    t: float,
    side: str | None = None,
    h: float | None = None,
    config: EngineConfig | None = None,
) -> FracDerivResult:
    """Finite differences of the raw defining integral (the slow cross-check).

    One-sided difference quotients of H(t) = int_0^t (t-x)^(-a)(f(x)-f(0)) dx
    with three-level Richardson extrapolation; the stencil must not cross a
    breakpoint.
    """
    config = config or DEFAULT_CONFIG
    alpha = FracOrder(float(alpha)).alpha
    t = f._snap_to_breakpoint(f._check_domain(t))
    h = h if h is not None else config.oracle_step
    n = config.nodes
    if side is None:
        if t == 0.0:
            sides = [RIGHT]
        elif _close(t, f.domain_end):
            sides = [LEFT]
        else:
            sides = [LEFT, RIGHT]
    else:
        sides = [side]
    vals = {}
    errs = {}
    for s in sides:
        vals[s], errs[s] = _oracle_one_side(f, alpha, t, s, h, n)
    if side is not None:
        return _one_sided(t, alpha, vals[side], ORACLE, errs[side])
    left = vals.get(LEFT, vals.get(RIGHT))
    right = vals.get(RIGHT, vals.get(LEFT))
    err = max(errs.values())
    return _merged(t, alpha, left, right, ORACLE, err, config)


def frac_deriv(
    f: PiecewiseFn,
    alpha: float,
    t: float,
    method: str = "auto",
    side: str | None = None,
    config: EngineConfig | None = None,
) -> FracDerivResult:
    """Dispatch: symbolic when the function flattens, else quadrature."""
    if method == "auto":
        method = SYMBOLIC if f.flatten() is not None else QUADRATURE
    if method == SYMBOLIC:
        return frac_deriv_symbolic(f, alpha, t, side=side, config=config)
    if method == QUADRATURE:
        return frac_deriv_quadrature(f, alpha, t, side=side, config=config)
    if method == ORACLE:
        return frac_deriv_oracle(f, alpha, t, side=side, config=config)
    raise DomainError(f"unknown method {method!r}")
