"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DimensionMismatch -> 3, NumericFault -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration or malformed input file."""


class IngestError(ConfigError):
    """CSV ingestion failure; message names the offending row/column."""


class DimensionMismatch(ValueError):
    """Policy, environment or checkpoint shapes are incompatible."""


class NumericFault(RuntimeError):
    """Non-finite value where a finite one is required (gradient, activation)."""


class EnumerationBudget(RuntimeError):
    """Exhaustive trajectory enumeration would exceed its size budget."""
