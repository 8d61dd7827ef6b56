"""Checks for the three claimed product/chain identities and locality.

For a rule, a point and concrete operands, both sides are evaluated with
the derivative engine and the residual decides HOLDS vs VIOLATED. Side
conditions (one-sided classical derivatives, differentiability) are always
computed and reported, never assumed: the identities are stated for
specific differentiability patterns and the whole point of the checker is
to expose whether the inputs actually satisfy them.

reproduce_suite() runs the five built-in falsifying configurations (two
for the product rule, two for the outer-differentiable chain rule, one for
the inner-differentiable chain rule) plus the left-locality check, and
compares every computed cell against its expected value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .engine import DEFAULT_CONFIG, EngineConfig, FracOrder, frac_deriv
from .errors import DomainError
from .piecewise import LEFT, RIGHT, PiecewiseFn, compose, mul, parse, range_bounds

VERDICT_TOL = 1e-6
LOCALITY_TOL = 1e-8


class RuleId(enum.Enum):
    LEIBNIZ = "leibniz"
    CHAIN_A = "chain-a"
    CHAIN_B = "chain-b"


@dataclass(frozen=True)
class OperandConditions:
    """One-sided classical derivatives of an operand at the probe point."""

    left_derivative: float | None
    right_derivative: float | None
    differentiable: bool
    note: str = ""


@dataclass(frozen=True)
class RuleReport:
    rule: RuleId
    point: float
    alpha: float
    lhs: float
    rhs: float
    residual: float
    verdict: str  # HOLDS | VIOLATED
    side_conditions: dict


@dataclass(frozen=True)
class LocalityReport:
    """Derivative of a base function at t0 against its right continuations."""

    t0: float
    alpha: float
    base_value: float
    continuation_values: tuple
    max_deviation: float


def _verdict(residual: float, tol: float) -> str:
    return "HOLDS" if residual <= tol else "VIOLATED"


def _conditions(f: PiecewiseFn, x: float) -> OperandConditions:
    left = right = None
    note = ""
    if x > 0.0:
        left = f.classical_derivative(x, LEFT)
    else:
        note = "one-sided at the domain start"
    if x < f.domain_end:
        right = f.classical_derivative(x, RIGHT)
    else:
        note = "one-sided at the domain end"
    sides = [d for d in (left, right) if d is not None]
    if not sides or not all(math.isfinite(d) for d in sides):
        diff = False
    elif len(sides) == 1:
        diff = True  # boundary point: one-sided differentiability
    else:
        diff = abs(sides[0] - sides[1]) <= 1e-9 * max(1.0, abs(sides[0]), abs(sides[1]))
    return OperandConditions(left, right, diff, note)


def _two_sided_derivative(f: PiecewiseFn, x: float) -> float:
    cond = _conditions(f, x)
    sides = [d for d in (cond.left_derivative, cond.right_derivative) if d is not None]
    if not all(math.isfinite(d) for d in sides):
        raise DomainError(f"classical derivative blows up at {x!r}")
    if len(sides) == 2 and not cond.differentiable:
        raise DomainError(
            f"one-sided derivatives disagree at {x!r}: {sides[0]!r} vs {sides[1]!r}"
        )
    return sides[0] if len(sides) == 1 else 0.5 * (sides[0] + sides[1])


def _value(f: PiecewiseFn, alpha: float, t: float, config) -> float:
    r = frac_deriv(f, alpha, t, config=config)
    if r.mismatch:
        raise DomainError(
            f"one-sided limits disagree at {t!r} "
            f"({r.left_limit!r} vs {r.right_limit!r}); no two-sided value"
        )
    return r.value


def check_leibniz(
    u: PiecewiseFn,
    v: PiecewiseFn,
    alpha: float,
    t: float,
    config: EngineConfig | None = None,
    tol: float = VERDICT_TOL,
) -> RuleReport:
    """(u v)^(a) ?= u^(a) v + u v^(a) at t."""
    config = config or DEFAULT_CONFIG
    alpha = FracOrder(float(alpha)).alpha
    lhs = _value(mul(u, v), alpha, t, config)
    rhs = _value(u, alpha, t, config) * v.eval(t) + u.eval(t) * _value(v, alpha, t, config)
    lhs, rhs = lhs + 0.0, rhs + 0.0
    residual = abs(lhs - rhs)
    return RuleReport(
        rule=RuleId.LEIBNIZ,
        point=t,
        alpha=alpha,
        lhs=lhs,
        rhs=rhs,
        residual=residual,
        verdict=_verdict(residual, tol),
        side_conditions={"u": _conditions(u, t), "v": _conditions(v, t)},
    )


def check_chain_a(
    f: PiecewiseFn,
    u: PiecewiseFn,
    alpha: float,
    t: float,
    config: EngineConfig | None = None,
    tol: float = VERDICT_TOL,
) -> RuleReport:
    """(f(u))^(a) ?= f'(u(t)) u^(a) at t, for differentiable outer f."""
    config = config or DEFAULT_CONFIG
    alpha = FracOrder(float(alpha)).alpha
    lhs = _value(compose(f, u), alpha, t, config)
    ut = u.eval(t)
    f_cond = _conditions(f, ut)
    if f_cond.differentiable:
        fprime = f_cond.left_derivative if f_cond.left_derivative is not None else f_cond.right_derivative
        if f_cond.left_derivative is not None and f_cond.right_derivative is not None:
            fprime = 0.5 * (f_cond.left_derivative + f_cond.right_derivative)
        note = ""
    else:
        finite = [
            d
            for d in (f_cond.left_derivative, f_cond.right_derivative)
            if d is not None and math.isfinite(d)
        ]
        fprime = sum(finite) / len(finite) if finite else math.nan
        note = "precondition violated: outer function not differentiable at u(t)"
    f_cond = OperandConditions(
        f_cond.left_derivative, f_cond.right_derivative, f_cond.differentiable, note
    )
    rhs = fprime * _value(u, alpha, t, config)
    lhs, rhs = lhs + 0.0, rhs + 0.0
    residual = abs(lhs - rhs)
    return RuleReport(
        rule=RuleId.CHAIN_A,
        point=t,
        alpha=alpha,
        lhs=lhs,
        rhs=rhs,
        residual=residual,
        verdict=_verdict(residual, tol),
        side_conditions={"u": _conditions(u, t), "f_at_u": f_cond},
    )


def check_chain_b(
    f: PiecewiseFn,
    u: PiecewiseFn,
    alpha: float,
    t: float,
    config: EngineConfig | None = None,
    tol: float = VERDICT_TOL,
) -> RuleReport:
    """(f(u))^(a) ?= f^(a)(u(t)) (u'(t))^a at t, for differentiable inner u."""
    config = config or DEFAULT_CONFIG
    alpha = FracOrder(float(alpha)).alpha
    lhs = _value(compose(f, u), alpha, t, config)
    uprime = _two_sided_derivative(u, t)
    if uprime < 0.0:
        raise DomainError(
            f"(u'(t))^alpha is not real: u'({t!r}) = {uprime!r} < 0"
        )
    rhs = _value(f, alpha, u.eval(t), config) * uprime ** alpha
    lhs, rhs = lhs + 0.0, rhs + 0.0
    residual = abs(lhs - rhs)
    return RuleReport(
        rule=RuleId.CHAIN_B,
        point=t,
        alpha=alpha,
        lhs=lhs,
        rhs=rhs,
        residual=residual,
        verdict=_verdict(residual, tol),
        side_conditions={"u": _conditions(u, t), "f_at_u": _conditions(f, u.eval(t))},
    )


def locality_test(
    u1: PiecewiseFn,
    continuations,
    alpha: float,
    t0: float,
    config: EngineConfig | None = None,
) -> LocalityReport:
    """Check that right continuations past t0 cannot change D^a at t0.

    Each continuation is glued to u1 at t0 (continuity verified); the
    derivative of every glued function at t0 is compared against the base
    derivative of u1 alone.
    """
    config = config or DEFAULT_CONFIG
    alpha = FracOrder(float(alpha)).alpha
    base = _value(u1, alpha, t0, config)
    values = []
    for cont in continuations:
        glued = PiecewiseFn.glue(u1, cont, t0)
        values.append(_value(glued, alpha, t0, config))
    deviation = max((abs(v - base) for v in values), default=0.0)
    return LocalityReport(
        t0=t0,
        alpha=alpha,
        base_value=base,
        continuation_values=tuple(values),
        max_deviation=deviation,
    )


# --------------------------------------------------------------------------
# the built-in reproduction suite
# --------------------------------------------------------------------------

_SQRT_PI = math.sqrt(math.pi)

KINKED_SQRT = "sqrt(t) + relu(t-1)"      # sqrt(t), then sqrt(t)+t-1 past 1
VEE = "1 - t + 2*relu(t-1)"              # 1-t, then t-1 past 1
SQUARE = "u^2"
KINKED_SQRT_U = "sqrt(u) + relu(u-1)"    # same kink, read in the u variable


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    description: str
    report: RuleReport
    expected_lhs: float
    expected_rhs: float
    ok: bool


@dataclass(frozen=True)
class ReproductionResult:
    cases: tuple
    locality: LocalityReport
    locality_ok: bool
    tol: float

    @property
    def ok(self) -> bool:
        return self.locality_ok and all(c.ok for c in self.cases)


def reproduce_suite(
    alpha: float = 0.5,
    domain_end: float = 4.0,
    config: EngineConfig | None = None,
    tol: float = VERDICT_TOL,
) -> ReproductionResult:
    """Run the five falsification cases plus the locality check.

    The expected columns are the known closed-form values (at alpha = 1/2);
    a case passes when each computed side is within tol of its expected
    value and the verdict is VIOLATED.
    """
    config = config or DEFAULT_CONFIG
    if abs(alpha - 0.5) > 1e-12:
        raise DomainError("the built-in suite's expected values are for alpha = 1/2")
    T = domain_end
    u1 = parse(KINKED_SQRT, T)
    u2 = parse(VEE, T)
    tsq = parse("t^2", T)
    sq = parse(SQUARE, max(range_bounds(u1)[1], range_bounds(u2)[1]))
    f5 = parse(KINKED_SQRT_U, range_bounds(tsq)[1])

    plan = [
        (
            "CE1",
            "product rule, u = v = sqrt(t)+relu(t-1) at t=1",
            check_leibniz(u1, u1, alpha, 1.0, config, tol),
            2.0 / _SQRT_PI,
            _SQRT_PI,
        ),
        (
            "CE2",
            "product rule, u = v = 1-t+2*relu(t-1) at t=1",
            check_leibniz(u2, u2, alpha, 1.0, config, tol),
            -4.0 / (3.0 * _SQRT_PI),
            0.0,
        ),
        (
            "CE3",
            "chain rule A, f = u^2, u = sqrt(t)+relu(t-1) at t=1",
            check_chain_a(sq, u1, alpha, 1.0, config, tol),
            2.0 / _SQRT_PI,
            _SQRT_PI,
        ),
        (
            "CE4",
            "chain rule A, f = u^2, u = 1-t+2*relu(t-1) at t=1",
            check_chain_a(sq, u2, alpha, 1.0, config, tol),
            -4.0 / (3.0 * _SQRT_PI),
            0.0,
        ),
        (
            "CE5",
            "chain rule B, f = sqrt(u)+relu(u-1), u = t^2 at t=1",
            check_chain_b(f5, tsq, alpha, 1.0, config, tol),
            2.0 / _SQRT_PI,
            math.sqrt(math.pi / 2.0),
        ),
    ]
    cases = []
    for case_id, desc, report, exp_lhs, exp_rhs in plan:
        ok = (
            abs(report.lhs - exp_lhs) <= tol
            and abs(report.rhs - exp_rhs) <= tol
            and report.verdict == "VIOLATED"
        )
        cases.append(CaseResult(case_id, desc, report, exp_lhs, exp_rhs, ok))

    base = parse("sqrt(t)", T)
    continuations = [
        parse("sqrt(t)", T),
        parse("sqrt(t) + relu(t-1)", T),
        parse("sqrt(t) + 5*relu(t-1)", T),
    ]
    loc = locality_test(base, continuations, alpha, 1.0, config)
    loc_ok = loc.max_deviation <= LOCALITY_TOL and abs(loc.base_value - _SQRT_PI / 2.0) <= tol
    return ReproductionResult(tuple(cases), loc, loc_ok, tol)
