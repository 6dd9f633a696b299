from .portfolio_synth import HOLD, INVEST, PortfolioSynthConfig, PortfolioSynthEnv
from .option import CONTINUE, EXERCISE, OptionEnvConfig, AmericanOptionEnv
from .dataset import (
    CsvFormatSpec,
    DatasetPortfolioConfig,
    DatasetPortfolioEnv,
    ReturnsMatrix,
    load_returns_csv,
)

__all__ = [
    "HOLD",
    "INVEST",
    "PortfolioSynthConfig",
    "PortfolioSynthEnv",
    "CONTINUE",
    "EXERCISE",
    "OptionEnvConfig",
    "AmericanOptionEnv",
    "CsvFormatSpec",
    "DatasetPortfolioConfig",
    "DatasetPortfolioEnv",
    "ReturnsMatrix",
    "load_returns_csv",
]
