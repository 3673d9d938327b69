class NNCoreError(Exception):
    pass


class ShapeError(NNCoreError, ValueError):
    pass


class DegenerateRowError(NNCoreError, ValueError):
    """A softmax row had every entry masked out."""


class NoSignalError(NNCoreError, ValueError):
    """A loss was requested with all position weights equal to zero."""


class ContractError(NNCoreError, ValueError):
    pass


class UnsteppedParameterError(NNCoreError, RuntimeError):
    """adam_step was handed a parameter whose gradient was never populated."""


class ConfigError(NNCoreError, ValueError):
    pass
