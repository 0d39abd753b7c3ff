"""Exception types shared across the package."""


class QacError(Exception):
    """Base class for all qacrank errors."""


class ConfigurationError(QacError):
    """Invalid generator, model, or experiment configuration."""


class DuplicateQueryError(QacError):
    """Catalog contains the same query text more than once."""


class DatasetError(QacError):
    """A dataset is empty, malformed, or inconsistent with the catalog."""


class LayoutMismatchError(QacError):
    """Feature layout version or dimensions do not match the fitted artifact."""


class TrainingDivergedError(QacError):
    """Training produced a non-finite loss or parameter."""
