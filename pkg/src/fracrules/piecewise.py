"""Continuous piecewise-smooth functions on [0, T].

Functions are expression trees built from shifted-power terms
c*(x-b)^p (active for x >= b, zero before, p > 0 so every term is
continuous), sums, products and compositions. A small text DSL provides
the user surface:

    expr   := ['-'] term (('+'|'-') term)*
    term   := factor ('*' factor)*
    factor := atom ('^' number)*
    atom   := number | 't' | 'u' | 'sqrt' '(' expr ')' | 'relu' '(' expr ')'
            | 'pshift' '(' number ',' number ',' number ')' | '(' expr ')'

relu(t-b) is surface syntax for the unit shifted ramp, pshift(c,b,p) for
the general term c*(t-b)^p. sqrt takes an affine argument that stays
nonnegative on the domain. Breakpoints are inferred from the shift points
(and from preimages of shift points under composition).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

from .errors import ContinuityError, DomainError, ParseError

LEFT = "left"
RIGHT = "right"

CONTINUITY_TOL = 1e-12
_INT_TOL = 1e-9


def _is_int(x: float) -> bool:
    return abs(x - round(x)) <= _INT_TOL


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))


# --------------------------------------------------------------------------
# expression nodes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Power:
    """coef * (x - shift)^exponent for x >= shift, 0 before; exponent > 0."""

    coef: float
    shift: float
    exponent: float

    def __post_init__(self):
        if self.exponent <= 0:
            raise DomainError(f"power exponent must be > 0, got {self.exponent!r}")
        if self.shift < 0:
            raise DomainError(f"power shift must be >= 0, got {self.shift!r}")


@dataclass(frozen=True)
class Sum:
    terms: tuple


@dataclass(frozen=True)
class Product:
    factors: tuple


@dataclass(frozen=True)
class Compose:
    """outer(inner(x)); outer is an expression in one variable."""

    outer: object
    inner: object


Expr = Const | Power | Sum | Product | Compose


def expr_eval(e: Expr, x: float, lo: float | None = None) -> float:
    """Value at x.

    With lo=None a Power term is active when x >= shift (the global
    reading); with lo given, activity is frozen to shift <= lo, which is
    the correct reading inside the piece starting at lo.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Power):
        active = (e.shift <= lo + 1e-15) if lo is not None else (x >= e.shift)
        if not active:
            return 0.0
        d = x - e.shift
        if d <= 0.0:
            return 0.0
        return e.coef * d ** e.exponent
    if isinstance(e, Sum):
        return math.fsum(expr_eval(c, x, lo) for c in e.terms)
    if isinstance(e, Product):
        out = 1.0
        for f in e.factors:
            out *= expr_eval(f, x, lo)
        return out
    if isinstance(e, Compose):
        return expr_eval(e.outer, expr_eval(e.inner, x, lo))
    raise TypeError(f"not an expression: {e!r}")


def expr_deriv(e: Expr, x: float, lo: float | None, side: str) -> float:
    """One-sided pointwise derivative; may return +-inf or nan at kinks.

    Activity of a Power anchored exactly at x is decided by `side` (right
    derivative includes the just-starting term) unless `lo` freezes it.
    """
    if isinstance(e, Const):
        return 0.0
    if isinstance(e, Power):
        if lo is not None:
            active = e.shift <= lo + 1e-15
        else:
            active = x > e.shift or (x == e.shift and side == RIGHT)
        if not active:
            return 0.0
        d = x - e.shift
        if d > 0.0:
            return e.coef * e.exponent * d ** (e.exponent - 1.0)
        if side == LEFT:
            return 0.0
        if e.exponent > 1.0:
            return 0.0
        if e.exponent == 1.0:
            return e.coef
        return math.copysign(math.inf, e.coef)
    if isinstance(e, Sum):
        return sum(expr_deriv(c, x, lo, side) for c in e.terms)
    if isinstance(e, Product):
        vals = [expr_eval(f, x, lo) for f in e.factors]
        total = 0.0
        for i, f in enumerate(e.factors):
            d = expr_deriv(f, x, lo, side)
            rest = 1.0
            for j, v in enumerate(vals):
                if j != i:
                    rest *= v
            total += d * rest
        return total
    if isinstance(e, Compose):
        u = expr_eval(e.inner, x, lo)
        du = expr_deriv(e.inner, x, lo, side)
        side_u = side if du >= 0 else (LEFT if side == RIGHT else RIGHT)
        dv = expr_deriv(e.outer, u, None, side_u)
        return dv * du
    raise TypeError(f"not an expression: {e!r}")


def _collect_power_shifts(e: Expr, acc: set) -> None:
    if isinstance(e, Power):
        acc.add(e.shift)
    elif isinstance(e, Sum):
        for c in e.terms:
            _collect_power_shifts(c, acc)
    elif isinstance(e, Product):
        for f in e.factors:
            _collect_power_shifts(f, acc)
    elif isinstance(e, Compose):
        # inner shifts are breakpoint candidates directly; outer shifts
        # map back through preimages, handled by the breakpoint collector
        _collect_power_shifts(e.inner, acc)


def _fractional_anchors(e: Expr, acc: set) -> None:
    """Shift points where the expression is not analytic (fractional powers)."""
    if isinstance(e, Power):
        if not _is_int(e.exponent):
            acc.add(e.shift)
    elif isinstance(e, Sum):
        for c in e.terms:
            _fractional_anchors(c, acc)
    elif isinstance(e, Product):
        for f in e.factors:
            _fractional_anchors(f, acc)
    elif isinstance(e, Compose):
        _fractional_anchors(e.inner, acc)
        # conservative: a fractional outer makes every inner preimage a
        # candidate; the breakpoint set already contains those points
        _collect_power_shifts(e.inner, acc)


# --------------------------------------------------------------------------
# shifted-power sums (the symbolic representation)
# --------------------------------------------------------------------------

class _NotFlat(Exception):
    pass


@dataclass(frozen=True)
class PowerSum:
    """const + sum of c*(x-b)^p terms, each active for x >= b."""

    const: float
    terms: tuple  # of (coef, shift, exponent)

    def eval(self, x: float) -> float:
        total = self.const
        for c, b, p in self.terms:
            if x > b:
                total += c * (x - b) ** p
        return total

    def add(self, other: "PowerSum") -> "PowerSum":
        return _canonical(self.const + other.const, self.terms + other.terms)

    def scale(self, k: float) -> "PowerSum":
        return _canonical(k * self.const, tuple((k * c, b, p) for c, b, p in self.terms))

    def shift_const(self, k: float) -> "PowerSum":
        return PowerSum(self.const + k, self.terms)

    def mul(self, other: "PowerSum") -> "PowerSum":
        terms = []
        const = self.const * other.const
        for c, b, p in self.terms:
            if other.const != 0.0:
                terms.append((c * other.const, b, p))
        for c, b, p in other.terms:
            if self.const != 0.0:
                terms.append((c * self.const, b, p))
        for c1, b1, p1 in self.terms:
            for c2, b2, p2 in other.terms:
                terms.extend(_term_product(c1, b1, p1, c2, b2, p2))
        return _canonical(const, tuple(terms))

    def int_pow(self, k: int) -> "PowerSum":
        out = PowerSum(1.0, ())
        for _ in range(k):
            out = out.mul(self)
        return out

    def max_scale(self) -> float:
        m = abs(self.const)
        for c, _, _ in self.terms:
            m = max(m, abs(c))
        return m


def _canonical(const: float, terms) -> PowerSum:
    merged: dict = {}
    for c, b, p in terms:
        key = (b, p)
        merged[key] = merged.get(key, 0.0) + c
    scale = max([abs(const)] + [abs(c) for c in merged.values()] + [1.0])
    kept = tuple(
        (c, b, p)
        for (b, p), c in sorted(merged.items())
        if abs(c) > 1e-14 * scale
    )
    return PowerSum(const, kept)


def _term_product(c1, b1, p1, c2, b2, p2):
    """(c1 (x-b1)^p1 1{x>=b1}) * (c2 (x-b2)^p2 1{x>=b2}) as anchored terms."""
    if b1 == b2:
        return [(c1 * c2, b1, p1 + p2)]
    if b1 > b2:
        c1, b1, p1, c2, b2, p2 = c2, b2, p2, c1, b1, p1
    # support is x >= b2; only an integer lower exponent expands finitely there
    if not _is_int(p1):
        raise _NotFlat(f"cross-shift product with fractional exponent {p1!r}")
    n = round(p1)
    out = []
    for k in range(n + 1):
        coef = c1 * c2 * math.comb(n, k) * (b2 - b1) ** (n - k)
        out.append((coef, b2, k + p2))
    return out


def _taylor_anchor(ps: PowerSum, tau: float):
    """Re-anchor an integer-exponent power sum at tau, for use on x >= tau.

    Every term must be an integer power anchored at or before tau; the
    expansion about tau is then exact on x >= tau. Returns anchored terms
    of (x-tau)^j, j >= 1; the constant coefficient must vanish (the
    caller guarantees ps(tau) = 0 up to roundoff).
    """
    out: dict = {}
    s0 = ps.const
    for c, b, p in ps.terms:
        if not _is_int(p) or b > tau:
            raise _NotFlat("cannot re-anchor a fractional or later-anchored term")
        k = round(p)
        base = tau - b
        s0 += c * base ** k
        for j in range(1, k + 1):
            out[j] = out.get(j, 0.0) + c * math.comb(k, j) * base ** (k - j)
    if abs(s0) > 1e-9 * max(1.0, ps.max_scale()):
        raise _NotFlat(f"re-anchored sum does not vanish at {tau!r}")
    return tuple((c, tau, float(j)) for j, c in sorted(out.items()) if c != 0.0)


def flatten_expr(e: Expr, domain_end: float) -> PowerSum:
    """Flatten to a shifted-power sum; raises _NotFlat when impossible."""
    if isinstance(e, Const):
        return PowerSum(e.value, ())
    if isinstance(e, Power):
        return PowerSum(0.0, ((e.coef, e.shift, e.exponent),))
    if isinstance(e, Sum):
        out = PowerSum(0.0, ())
        for c in e.terms:
            out = out.add(flatten_expr(c, domain_end))
        return out
    if isinstance(e, Product):
        out = PowerSum(1.0, ())
        for f in e.factors:
            out = out.mul(flatten_expr(f, domain_end))
        return out
    if isinstance(e, Compose):
        return _flatten_compose(e, domain_end)
    raise TypeError(f"not an expression: {e!r}")


def _flatten_compose(e: Compose, domain_end: float) -> PowerSum:
    po = flatten_expr(e.outer, domain_end)
    pi = flatten_expr(e.inner, domain_end)
    out = PowerSum(po.const, ())
    for c, shift_u, p in po.terms:
        g = pi.shift_const(-shift_u)
        out = out.add(_compose_term(c, p, g, domain_end))
    return out


def _compose_term(c: float, p: float, g: PowerSum, domain_end: float) -> PowerSum:
    """c * g(x)^p on {x: g(x) >= 0} as an anchored power sum."""
    grid = [domain_end * k / 512 for k in range(513)]
    vals = [g.eval(x) for x in grid]
    scale = max(1.0, g.max_scale())
    if min(vals) >= -1e-13 * scale:
        # active on the whole domain
        if _is_int(p):
            return g.int_pow(round(p)).scale(c)
        if g.const == 0.0 and len(g.terms) == 1 and g.terms[0][0] > 0:
            a, b, q = g.terms[0]
            return PowerSum(0.0, ((c * a ** p, b, q * p),))
        raise _NotFlat("fractional power of a non-pure inner function")
    if max(vals) <= 1e-13 * scale:
        return PowerSum(0.0, ())
    # require a single sign change (suffix activity {x >= tau})
    crossings = [
        k for k in range(len(vals) - 1)
        if (vals[k] < 0.0) != (vals[k + 1] < 0.0)
    ]
    if len(crossings) != 1 or vals[0] >= 0.0:
        raise _NotFlat("composition active region is not a suffix of the domain")
    k = crossings[0]
    lo, hi = grid[k], grid[k + 1]
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if g.eval(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    tau = _snap(0.5 * (lo + hi))
    if not _is_int(p):
        if g.const == 0.0 and len(g.terms) == 1 and g.terms[0][0] > 0:
            a, b, q = g.terms[0]
            return PowerSum(0.0, ((c * a ** p, b, q * p),))
        raise _NotFlat("fractional power of a non-pure inner function")
    s = g.int_pow(round(p))
    return _anchor_at(s, tau).scale(c)


def _snap(x: float) -> float:
    r = round(x, 12)
    return r if abs(r - x) <= 1e-10 * max(1.0, abs(x)) else x


# --------------------------------------------------------------------------
# leading-order (algebraic) analysis
# --------------------------------------------------------------------------

_ZERO = (math.inf, 0.0)


class _Ambiguous(Exception):
    pass


def _combine(parts):
    """Combine (order, coef) contributions of a sum."""
    parts = [p for p in parts if p[0] != math.inf]
    if not parts:
        return _ZERO
    q = min(p[0] for p in parts)
    attain = [c for o, c in parts if abs(o - q) <= 1e-12]
    others = [c for o, c in parts if abs(o - q) > 1e-12]
    c = math.fsum(attain)
    scale = max(abs(v) for v in attain)
    if scale > 0 and abs(c) <= 1e-9 * scale:
        raise _Ambiguous("leading coefficients cancel")
    _ = others
    return (q, c)


def _lead_value(e: Expr, a: float, side: str):
    """(q, c) with e near a on the given side ~ c * eps^q (q=0: plain value)."""
    if isinstance(e, Const):
        return (0.0, e.value) if e.value != 0.0 else _ZERO
    if isinstance(e, Power):
        if e.coef == 0.0:
            return _ZERO
        if a > e.shift:
            v = e.coef * (a - e.shift) ** e.exponent
            return (0.0, v) if v != 0.0 else _ZERO
        if a == e.shift:
            return (e.exponent, e.coef) if side == RIGHT else _ZERO
        return _ZERO
    if isinstance(e, Sum):
        return _combine([_lead_value(c, a, side) for c in e.terms])
    if isinstance(e, Product):
        q, c = 0.0, 1.0
        for f in e.factors:
            qf, cf = _lead_value(f, a, side)
            if qf == math.inf:
                return _ZERO
            q, c = q + qf, c * cf
        return (q, c)
    raise _Ambiguous("unsupported node for symbolic expansion")


def _lead_deriv(e: Expr, a: float, side: str):
    """(q, c) with e'(a +- eps) ~ c * eps^q; inf order means identically 0."""
    if isinstance(e, Const):
        return _ZERO
    if isinstance(e, Power):
        if e.coef == 0.0:
            return _ZERO
        if a > e.shift:
            v = e.coef * e.exponent * (a - e.shift) ** (e.exponent - 1.0)
            return (0.0, v) if v != 0.0 else _ZERO
        if a == e.shift:
            return (e.exponent - 1.0, e.coef * e.exponent) if side == RIGHT else _ZERO
        return _ZERO
    if isinstance(e, Sum):
        return _combine([_lead_deriv(c, a, side) for c in e.terms])
    if isinstance(e, Product):
        parts = []
        for i, f in enumerate(e.factors):
            qd, cd = _lead_deriv(f, a, side)
            if qd == math.inf:
                continue
            q, c = qd, cd
            dead = False
            for j, g in enumerate(e.factors):
                if j == i:
                    continue
                qv, cv = _lead_value(g, a, side)
                if qv == math.inf:
                    dead = True
                    break
                q, c = q + qv, c * cv
            if not dead:
                parts.append((q, c))
        return _combine(parts)
    raise _Ambiguous("unsupported node for symbolic expansion")


def _fit_leading(h, scale: float = 1.0, eps0: float = 1e-3):
    """Numeric (q, c) fit of h(eps) ~ c eps^q from a decade ladder."""
    eps0 = max(min(eps0, 1e-3), 1e-12)
    eps = [eps0, eps0 / 10.0, eps0 / 100.0, eps0 / 1000.0]
    vals = [h(x) for x in eps]
    if all(abs(v) <= 1e-13 * max(1.0, scale) for v in vals):
        return _ZERO
    v1, v2 = vals[-2], vals[-1]
    if v2 == 0.0 or v1 == 0.0 or (v1 < 0) != (v2 < 0):
        return _ZERO
    q = math.log(abs(v1) / abs(v2)) / math.log(eps[-2] / eps[-1])
    c = v2 / eps[-1] ** q
    return (q, c)


# --------------------------------------------------------------------------
# piecewise functions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SingularityTag:
    """Algebraic blow-up of the classical derivative: ~ c*(x-location)^exponent."""

    location: float
    exponent: float
    side: str

    def __post_init__(self):
        if self.exponent <= -1:
            raise DomainError(
                f"non-integrable derivative singularity (exponent {self.exponent!r})"
            )


class PiecewiseFn:
    """A continuous function on [0, T] given as expression pieces.

    breakpoints are 0 = b0 < b1 < ... < bm = T; pieces[i] governs
    [b_i, b_{i+1}]. Continuity at interior breakpoints is verified at
    construction. Instances are immutable and safe to share.
    """

    __slots__ = ("breakpoints", "pieces", "source", "_flat", "_flat_ready")

    def __init__(self, breakpoints, pieces, source: str | None = None):
        bps = tuple(float(b) for b in breakpoints)
        if len(bps) < 2 or len(pieces) != len(bps) - 1:
            raise DomainError("breakpoints and pieces do not line up")
        if bps[0] != 0.0:
            raise DomainError("domain must start at 0")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise DomainError("breakpoints must be strictly increasing")
        for i in range(1, len(bps) - 1):
            lv = expr_eval(pieces[i - 1], bps[i])
            rv = expr_eval(pieces[i], bps[i])
            if abs(lv - rv) > CONTINUITY_TOL * max(1.0, abs(lv), abs(rv)):
                raise ContinuityError(bps[i], abs(lv - rv))
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", tuple(pieces))
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "_flat", None)
        object.__setattr__(self, "_flat_ready", False)

    def __setattr__(self, name, value):  # immutability guard
        raise AttributeError("PiecewiseFn is immutable")

    def __repr__(self):
        if self.source is not None:
            return f"PiecewiseFn({self.source!r}, T={self.domain_end})"
        return f"PiecewiseFn(<{len(self.pieces)} pieces>, T={self.domain_end})"

    # -- construction -------------------------------------------------

    @classmethod
    def from_expr(cls, expr: Expr, domain_end: float, source: str | None = None):
        if domain_end <= 0:
            raise DomainError(f"domain end must be positive, got {domain_end!r}")
        cuts = set()
        _collect_power_shifts(expr, cuts)
        cuts |= _compose_preimages(expr, domain_end)
        interior = sorted(b for b in cuts if 0.0 < b < domain_end and not _close(b, domain_end))
        bps = [0.0, *interior, float(domain_end)]
        return cls(bps, [expr] * (len(bps) - 1), source=source)

    @classmethod
    def glue(cls, base: "PiecewiseFn", continuation: "PiecewiseFn", t0: float):
        """base on [0, t0] continued by `continuation` on (t0, T]."""
        T = base.domain_end
        if not (0.0 < t0 < T) or not _close(T, continuation.domain_end):
            raise DomainError("gluing point must be interior to a shared domain")
        lv, rv = base.eval(t0), continuation.eval(t0)
        if abs(lv - rv) > CONTINUITY_TOL * max(1.0, abs(lv), abs(rv)):
            raise ContinuityError(t0, abs(lv - rv))
        bps = [b for b in base.breakpoints if b < t0 and not _close(b, t0)]
        bps.append(t0)
        pieces = [base.pieces[i] for i in range(len(bps) - 1)]
        k = min(bisect.bisect_right(continuation.breakpoints, t0) - 1,
                len(continuation.pieces) - 1)
        pieces.append(continuation.pieces[k])
        for j in range(k + 1, len(continuation.pieces)):
            bps.append(continuation.breakpoints[j])
            pieces.append(continuation.pieces[j])
        bps.append(T)
        return cls(bps, pieces)

    # -- basic queries -------------------------------------------------

    @property
    def domain_end(self) -> float:
        return self.breakpoints[-1]

    @property
    def value_at_0(self) -> float:
        return self.eval(0.0)

    def is_breakpoint(self, x: float) -> bool:
        return any(_close(x, b) for b in self.breakpoints[1:-1])

    def _snap_to_breakpoint(self, x: float) -> float:
        for b in self.breakpoints:
            if _close(x, b):
                return b
        return x

    def _check_domain(self, x: float) -> float:
        if x < -1e-12 or x > self.domain_end * (1 + 1e-12) + 1e-12:
            raise DomainError(f"{x!r} outside the domain [0, {self.domain_end}]")
        return min(max(x, 0.0), self.domain_end)

    def piece_index(self, x: float, side: str = RIGHT) -> int:
        x = self._snap_to_breakpoint(self._check_domain(x))
        if side == LEFT:
            i = bisect.bisect_left(self.breakpoints, x) - 1
        else:
            i = bisect.bisect_right(self.breakpoints, x) - 1
        return min(max(i, 0), len(self.pieces) - 1)

    def eval(self, x: float) -> float:
        x = self._check_domain(x)
        i = self.piece_index(x, RIGHT)
        return expr_eval(self.pieces[i], x)

    # -- classical derivative -----------------------------------------

    def classical_derivative(self, x: float, side: str) -> float:
        """One-sided derivative of the governing piece; +-inf at blow-ups."""
        _check_side(side)
        x = self._snap_to_breakpoint(self._check_domain(x))
        if x == 0.0 and side == LEFT:
            raise DomainError("no left derivative at 0")
        if x == self.domain_end and side == RIGHT:
            raise DomainError(f"no right derivative at the domain end {x!r}")
        i = self.piece_index(x, side)
        lo = self.breakpoints[i]
        v = expr_deriv(self.pieces[i], x, lo, side)
        if math.isfinite(v):
            return v
        q, c = self._deriv_leading(x, side)
        if q == math.inf:
            return 0.0
        if q > 1e-12:
            return 0.0
        if abs(q) <= 1e-12:
            return c
        return math.copysign(math.inf, c)

    def derivative_singularity(self, x: float, side: str) -> SingularityTag | None:
        """Tag the algebraic blow-up of the derivative at x, if any."""
        _check_side(side)
        x = self._snap_to_breakpoint(self._check_domain(x))
        q, c = self._deriv_leading(x, side)
        if q < -1e-12 and c != 0.0:
            return SingularityTag(location=x, exponent=q, side=side)
        return None

    def _deriv_leading(self, x: float, side: str):
        i = self.piece_index(x, side)
        lo, hi = self.breakpoints[i], self.breakpoints[i + 1]
        expr = self.pieces[i]
        try:
            return _lead_deriv(expr, x, side)
        except _Ambiguous:
            pass
        sgn = 1.0 if side == RIGHT else -1.0
        gap = (hi - x) if side == RIGHT else (x - lo)
        scale = max(1.0, abs(self.eval(x)))
        probe = lambda s: expr_deriv(expr, x + sgn * s, lo, side)
        return _fit_leading(probe, scale, eps0=min(1e-3, gap / 20.0))

    # -- algebraic structure -------------------------------------------

    def flatten(self) -> PowerSum | None:
        """Shifted-power-sum form of the whole function, or None."""
        if self._flat_ready:
            return self._flat
        flat = None
        try:
            flat = self._flatten_pieces()
        except _NotFlat:
            flat = None
        object.__setattr__(self, "_flat", flat)
        object.__setattr__(self, "_flat_ready", True)
        return flat

    def _flatten_pieces(self) -> PowerSum:
        T = self.domain_end
        total = flatten_expr(self.pieces[0], T)
        prev = total
        for i in range(1, len(self.pieces)):
            if self.pieces[i] is self.pieces[i - 1]:
                continue
            cur = flatten_expr(self.pieces[i], T)
            diff = cur.add(prev.scale(-1.0))
            total = total.add(_anchor_at(diff, self.breakpoints[i]))
            prev = cur
        return total

    def to_source(self) -> str:
        """Canonical DSL text; re-parsing gives an equal function."""
        if all(p is self.pieces[0] for p in self.pieces):
            return _expr_to_source(self.pieces[0])
        raise DomainError("glued functions have no single-expression source")


def _check_side(side: str) -> None:
    if side not in (LEFT, RIGHT):
        raise DomainError(f"side must be {LEFT!r} or {RIGHT!r}, got {side!r}")


def _anchor_at(diff: PowerSum, b: float) -> PowerSum:
    """diff * 1{x >= b} as an anchored sum (diff vanishes at b)."""
    kept = []
    loose = []
    for c, s, p in diff.terms:
        if s > b or _close(s, b):
            kept.append((c, s, p))
        else:
            loose.append((c, s, p))
    poly = PowerSum(diff.const, tuple(loose))
    if poly.const != 0.0 or poly.terms:
        kept.extend(_taylor_anchor(poly, b))
    return _canonical(0.0, tuple(kept))


def _compose_preimages(e: Expr, domain_end: float) -> set:
    """Preimages (under inner) of outer shift points, for every Compose node."""
    out: set = set()
    if isinstance(e, Sum):
        for c in e.terms:
            out |= _compose_preimages(c, domain_end)
    elif isinstance(e, Product):
        for f in e.factors:
            out |= _compose_preimages(f, domain_end)
    elif isinstance(e, Compose):
        out |= _compose_preimages(e.inner, domain_end)
        shifts: set = set()
        _collect_power_shifts(e.outer, shifts)
        for B in shifts:
            out |= _preimage_points(e.inner, B, domain_end)
    return out


def _preimage_points(inner: Expr, level: float, domain_end: float) -> set:
    n = 4096
    xs = [domain_end * k / n for k in range(n + 1)]
    vals = [expr_eval(inner, x) - level for x in xs]
    roots = set()
    for k in range(n):
        v1, v2 = vals[k], vals[k + 1]
        if v1 == 0.0:
            roots.add(_snap(xs[k]))
        if (v1 < 0.0) != (v2 < 0.0):
            lo, hi = xs[k], xs[k + 1]
            flo = v1
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                fm = expr_eval(inner, mid) - level
                if (fm < 0.0) == (flo < 0.0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            roots.add(_snap(0.5 * (lo + hi)))
    if vals[-1] == 0.0:
        roots.add(_snap(xs[-1]))
    return roots


# --------------------------------------------------------------------------
# algebra on functions
# --------------------------------------------------------------------------

def _same_domain(f: PiecewiseFn, g: PiecewiseFn) -> float:
    if not _close(f.domain_end, g.domain_end):
        raise DomainError(
            f"incompatible domains: [0, {f.domain_end}] vs [0, {g.domain_end}]"
        )
    return f.domain_end


def _single_expr(f: PiecewiseFn) -> Expr | None:
    return f.pieces[0] if all(p is f.pieces[0] for p in f.pieces) else None


def _merge_binary(f: PiecewiseFn, g: PiecewiseFn, node) -> PiecewiseFn:
    T = _same_domain(f, g)
    ef, eg = _single_expr(f), _single_expr(g)
    if ef is not None and eg is not None:
        return PiecewiseFn.from_expr(node(ef, eg), T)
    bps = sorted({*f.breakpoints, *g.breakpoints})
    merged = [bps[0]]
    for b in bps[1:]:
        if not _close(b, merged[-1]):
            merged.append(b)
    pieces = []
    for lo in merged[:-1]:
        pieces.append(node(f.pieces[f.piece_index(lo, RIGHT)], g.pieces[g.piece_index(lo, RIGHT)]))
    return PiecewiseFn(merged, pieces)


def add(f: PiecewiseFn, g: PiecewiseFn) -> PiecewiseFn:
    """Pointwise sum; breakpoints are merged and continuity re-verified."""
    return _merge_binary(f, g, lambda a, b: Sum((a, b)))


def mul(f: PiecewiseFn, g: PiecewiseFn) -> PiecewiseFn:
    """Pointwise product; breakpoints are merged and continuity re-verified."""
    return _merge_binary(f, g, lambda a, b: Product((a, b)))


def scale(f: PiecewiseFn, k: float) -> PiecewiseFn:
    e = _single_expr(f)
    if e is not None:
        return PiecewiseFn.from_expr(Product((Const(k), e)), f.domain_end)
    return PiecewiseFn(f.breakpoints, [Product((Const(k), p)) for p in f.pieces])


def compose(outer: PiecewiseFn, inner: PiecewiseFn) -> PiecewiseFn:
    """outer(inner(x)).

    Requires inner's range to lie in outer's domain and inner to be
    monotone on each of its pieces, so breakpoints of the composition are
    computable as preimages of outer's breakpoints.
    """
    eo, ei = _single_expr(outer), _single_expr(inner)
    if eo is None or ei is None:
        raise DomainError("compose requires expression-backed operands")
    T = inner.domain_end
    lo_v, hi_v = range_bounds(inner)
    if lo_v < -1e-12 or hi_v > outer.domain_end * (1 + 1e-12) + 1e-12:
        raise DomainError(
            f"inner range [{lo_v:.6g}, {hi_v:.6g}] escapes the outer domain "
            f"[0, {outer.domain_end}]"
        )
    _require_piecewise_monotone(inner)
    return PiecewiseFn.from_expr(Compose(eo, ei), T)


def range_bounds(f: PiecewiseFn):
    """(min, max) of f over its domain, sampled on a grid plus breakpoints."""
    n = 1024
    T = f.domain_end
    pts = [T * k / n for k in range(n + 1)] + list(f.breakpoints)
    vals = [f.eval(x) for x in pts]
    return min(vals), max(vals)


def _require_piecewise_monotone(f: PiecewiseFn) -> None:
    n = 256
    for i, piece in enumerate(f.pieces):
        a, b = f.breakpoints[i], f.breakpoints[i + 1]
        vals = [expr_eval(piece, a + (b - a) * k / n) for k in range(n + 1)]
        tol = 1e-12 * max(1.0, max(abs(v) for v in vals))
        up = all(v2 >= v1 - tol for v1, v2 in zip(vals, vals[1:]))
        down = all(v2 <= v1 + tol for v1, v2 in zip(vals, vals[1:]))
        if not (up or down):
            raise DomainError(
                f"inner function is not monotone on piece [{a:.6g}, {b:.6g}]"
            )


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

_NUM_CHARS = set("0123456789.")


def _tokenize(src: str):
    toks = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*^(),":
            toks.append((ch, ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and src[j] in _NUM_CHARS:
                j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                while k < n and src[k].isdigit():
                    k += 1
                j = k
            try:
                val = float(src[i:j])
            except ValueError:
                raise ParseError(f"bad number {src[i:j]!r}", i) from None
            toks.append(("num", val, i))
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < n and src[j].isalnum():
                j += 1
            toks.append(("name", src[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    toks.append(("end", None, n))
    return toks


class _Parser:
    def __init__(self, src: str, domain_end: float):
        self.toks = _tokenize(src)
        self.pos = 0
        self.T = domain_end

    def peek(self):
        return self.toks[self.pos]

    def take(self, kind=None):
        tok = self.toks[self.pos]
        if kind is not None and tok[0] != kind:
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {kind!r}, found {found}", tok[2])
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected trailing {tok[1]!r}", tok[2])
        return e

    def expr(self) -> Expr:
        terms = []
        if self.peek()[0] == "-":
            self.take()
            terms.append(_negate(self.term()))
        else:
            terms.append(self.term())
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            t = self.term()
            terms.append(_negate(t) if op == "-" else t)
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> Expr:
        factors = [self.factor()]
        while self.peek()[0] == "*":
            self.take()
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else Product(tuple(factors))

    def factor(self) -> Expr:
        e = self.atom()
        while self.peek()[0] == "^":
            caret = self.take()
            sign = 1.0
            if self.peek()[0] == "-":
                self.take()
                sign = -1.0
            tok = self.take("num")
            e = _raise_power(e, sign * tok[1], caret[2], self.T)
        return e

    def atom(self) -> Expr:
        tok = self.peek()
        if tok[0] == "num":
            self.take()
            return Const(tok[1])
        if tok[0] == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        if tok[0] == "name":
            name = tok[1]
            if name in ("t", "u"):
                self.take()
                return Power(1.0, 0.0, 1.0)
            if name == "sqrt":
                self.take()
                self.take("(")
                arg = self.expr()
                self.take(")")
                return _make_sqrt(arg, tok[2], self.T)
            if name == "relu":
                self.take()
                self.take("(")
                arg = self.expr()
                self.take(")")
                return _make_relu(arg, tok[2], self.T)
            if name == "pshift":
                self.take()
                self.take("(")
                c = self.signed_number()
                self.take(",")
                b = self.signed_number()
                self.take(",")
                p = self.signed_number()
                self.take(")")
                if p <= 0:
                    raise ParseError("pshift exponent must be > 0", tok[2])
                if b < 0:
                    raise ParseError("pshift shift must be >= 0", tok[2])
                return Power(c, b, p)
            raise ParseError(f"unknown name {name!r}", tok[2])
        found = "end of input" if tok[0] == "end" else repr(tok[1])
        raise ParseError(f"unexpected {found}", tok[2])

    def signed_number(self) -> float:
        sign = 1.0
        if self.peek()[0] == "-":
            self.take()
            sign = -1.0
        return sign * self.take("num")[1]


def _negate(e: Expr) -> Expr:
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Power):
        return Power(-e.coef, e.shift, e.exponent)
    if isinstance(e, Sum):
        return Sum(tuple(_negate(t) for t in e.terms))
    return Product((Const(-1.0), e))


def _affine_parts(e: Expr, domain_end: float):
    """(c0, c1) with e == c0 + c1*x, or None."""
    try:
        ps = flatten_expr(e, domain_end)
    except _NotFlat:
        return None
    c0, c1 = ps.const, 0.0
    for c, b, p in ps.terms:
        if b == 0.0 and _is_int(p) and round(p) == 1:
            c1 += c
        else:
            return None
    return (c0, c1)


def _pure_power(e: Expr, domain_end: float):
    try:
        ps = flatten_expr(e, domain_end)
    except _NotFlat:
        return None
    if ps.const == 0.0 and len(ps.terms) == 1:
        return ps.terms[0]
    return None


def _make_sqrt(arg: Expr, pos: int, T: float) -> Expr:
    pure = _pure_power(arg, T)
    if pure is not None and pure[0] > 0:
        c, b, p = pure
        return Power(math.sqrt(c), b, p / 2.0)
    aff = _affine_parts(arg, T)
    if aff is None:
        raise ParseError("sqrt argument must be affine", pos)
    c0, c1 = aff
    if min(c0, c0 + c1 * T) < 0:
        raise ParseError("sqrt argument must be nonnegative on the domain", pos)
    if c1 == 0.0:
        return Const(math.sqrt(c0))
    # positive intercept: no shifted-power form, keep as a composition
    return Compose(Power(1.0, 0.0, 0.5), arg)


def _make_relu(arg: Expr, pos: int, T: float) -> Expr:
    pure = _pure_power(arg, T)
    if pure is not None and pure[0] > 0:
        return arg  # already nonnegative
    aff = _affine_parts(arg, T)
    if aff is None:
        raise ParseError("relu argument must be affine", pos)
    c0, c1 = aff
    if c1 == 0.0:
        return Const(max(c0, 0.0))
    root = -c0 / c1
    if c1 > 0:
        if root <= 0:
            return arg
        if root >= T:
            return Const(0.0)
        return Power(c1, root, 1.0)
    # decreasing argument: relu(g) = g + relu(-g)
    if root <= 0:
        return Const(0.0)
    if root >= T:
        return arg
    return Sum((Const(c0), Power(c1, 0.0, 1.0), Power(-c1, root, 1.0)))


def _raise_power(base: Expr, expo: float, pos: int, T: float) -> Expr:
    if expo <= 0:
        if expo == 0:
            return Const(1.0)
        raise ParseError("exponent must be positive", pos)
    if isinstance(base, Const):
        return Const(base.value ** expo)
    pure = _pure_power(base, T)
    if pure is not None:
        c, b, p = pure
        if c > 0:
            return Power(c ** expo, b, p * expo)
        if _is_int(expo):
            return Power(c ** round(expo), b, p * expo)
    if _is_int(expo):
        n = round(expo)
        return base if n == 1 else Product(tuple([base] * n))
    raise ParseError("fractional exponent needs a nonnegative power base", pos)


def parse(src: str, domain_end: float = 4.0) -> PiecewiseFn:
    """Parse DSL text into a PiecewiseFn on [0, domain_end]."""
    tree = _Parser(src, float(domain_end)).parse()
    return PiecewiseFn.from_expr(tree, float(domain_end), source=src)


# --------------------------------------------------------------------------
# pretty printing
# --------------------------------------------------------------------------

def _num(x: float) -> str:
    return repr(float(x))


def _expr_to_source(e: Expr, in_product: bool = False) -> str:
    if isinstance(e, Const):
        return _num(e.value) if e.value >= 0 else f"(-{_num(-e.value)})"
    if isinstance(e, Power):
        return _power_source(e)
    if isinstance(e, Sum):
        parts = [_expr_to_source(t, in_product=False) for t in e.terms]
        out = parts[0]
        for p in parts[1:]:
            out += f" + {p}" if not p.startswith("-") else f" - {p[1:]}"
        return f"({out})" if in_product else out
    if isinstance(e, Product):
        return "*".join(_expr_to_source(f, in_product=True) for f in e.factors)
    if isinstance(e, Compose):
        if e.outer == Power(1.0, 0.0, 0.5):
            return f"sqrt({_expr_to_source(e.inner)})"
        raise DomainError("composition has no DSL source form")
    raise TypeError(f"not an expression: {e!r}")


def _power_source(e: Power) -> str:
    c, b, p = e.coef, e.shift, e.exponent
    if b == 0.0:
        core = "t" if p == 1.0 else f"t^{_num(p)}"
        if c == 1.0:
            return core
        if c == -1.0:
            return f"-{core}"
        return f"{_num(c)}*{core}"
    return f"pshift({_num(c)},{_num(b)},{_num(p)})"
