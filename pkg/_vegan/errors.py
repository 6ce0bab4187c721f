class VeganError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(VeganError, ValueError):
    """Operand shapes do not conform to an operation's contraction or broadcasting rule."""


class NumericDomainError(VeganError, ArithmeticError):
    """A value left the domain of an operation or became non-finite."""


class ContractError(VeganError, ValueError):
    """A documented precondition was violated by the caller."""


class DatasetError(VeganError):
    """A dataset could not be generated, split or preprocessed."""


class ParseError(VeganError, ValueError):
    """An input file could not be parsed."""


class ConfigError(VeganError, ValueError):
    """A configuration value is missing or malformed."""


class CorruptionError(VeganError):
    """A corruption request is invalid or wiped out every covariate."""


class TrainingError(VeganError):
    def __init__(self, message: str, *, epoch: int, batch: int) -> None:
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
        self.epoch = epoch
        self.batch = batch
