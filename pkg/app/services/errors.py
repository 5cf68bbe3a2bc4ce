from typing import Any, List, Optional


class LabError(Exception):
    """Raíz de todos los errores del laboratorio."""


class TableValidationError(LabError):
    pass


class DimensionMismatchError(LabError):
    pass


class FactorizationError(LabError):
    pass


class TypicalityError(LabError):
    pass


class BudgetExceededError(LabError):
    def __init__(self, message: str, required: float, budget: float):
        super().__init__(message)
        self.required = required
        self.budget = budget


class SizingError(LabError):
    def __init__(self, message: str, minimal_n_prime: Optional[int] = None):
        super().__init__(message)
        self.minimal_n_prime = minimal_n_prime


class ConfigError(LabError):
    def __init__(self, errors: List[str]):
        super().__init__('; '.join(errors))
        self.errors = list(errors)


class VerificationFailure(LabError):
    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report
