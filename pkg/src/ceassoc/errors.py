"""Exception types with stable meanings across the package."""


class ContractError(ValueError):
    """A caller violated an operation's precondition (dimension mismatch,
    infeasible capacities, invalid parameter range)."""


class GenerationError(RuntimeError):
    """Deployment placement failed, e.g. separation rules cannot be met
    within the retry budget."""


class EvaluationError(ValueError):
    """An objective could not be evaluated (zero rate under log utility)."""


class EnumerationBudgetError(RuntimeError):
    """Exhaustive enumeration refused because J**I exceeds the budget."""


class ConfigError(ValueError):
    """A config document or CLI override failed validation."""
