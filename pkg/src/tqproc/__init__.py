"""tqproc: a Monte Carlo laboratory for time-dependent empirical and
quantile processes built from ensembles of fractional Brownian motion."""

__version__ = "1.0.0"

from . import analytic, empirical, experiments, fbm, seeding  # noqa: F401
from .errors import ConfigError, DataError, DomainError, NumericError  # noqa: F401
