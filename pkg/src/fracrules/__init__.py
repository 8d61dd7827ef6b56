"""Modified Riemann-Liouville fractional derivatives for piecewise-smooth
functions, with a falsification suite for the claimed product/chain rules."""

__version__ = "0.1.0"

from .engine import (
    DEFAULT_CONFIG,
    EngineConfig,
    FracDerivResult,
    FracOrder,
    QuadratureSpec,
    Subinterval,
    build_quadrature_spec,
    frac_deriv,
    frac_deriv_oracle,
    frac_deriv_quadrature,
    frac_deriv_symbolic,
)
from .errors import (
    ContinuityError,
    DomainError,
    FracRulesError,
    NotRepresentableError,
    ParseError,
    StepCollisionError,
)
from .piecewise import (
    LEFT,
    RIGHT,
    PiecewiseFn,
    SingularityTag,
    add,
    compose,
    mul,
    parse,
    range_bounds,
    scale,
)
from .rules import (
    LocalityReport,
    OperandConditions,
    RuleId,
    RuleReport,
    check_chain_a,
    check_chain_b,
    check_leibniz,
    locality_test,
    reproduce_suite,
)
from .special import JacobiRule, beta, gamma, jacobi_rule

__all__ = [
    "DEFAULT_CONFIG",
    "EngineConfig",
    "FracDerivResult",
    "FracOrder",
    "QuadratureSpec",
    "Subinterval",
    "build_quadrature_spec",
    "frac_deriv",
    "frac_deriv_oracle",
    "frac_deriv_quadrature",
    "frac_deriv_symbolic",
    "ContinuityError",
    "DomainError",
    "FracRulesError",
    "NotRepresentableError",
    "ParseError",
    "StepCollisionError",
    "LEFT",
    "RIGHT",
    "PiecewiseFn",
    "SingularityTag",
    "add",
    "compose",
    "mul",
    "parse",
    "range_bounds",
    "scale",
    "LocalityReport",
    "OperandConditions",
    "RuleId",
    "RuleReport",
    "check_chain_a",
    "check_chain_b",
    "check_leibniz",
    "locality_test",
    "reproduce_suite",
    "JacobiRule",
    "beta",
    "gamma",
    "jacobi_rule",
    "__version__",
]
