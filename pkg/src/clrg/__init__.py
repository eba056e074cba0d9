"""Constrained linear regression games: equilibria, dynamics and benchmarks."""

from .errors import *  # noqa: F401,F403
from .game import (
    GameConfig,
    GameSolution,
    IndexSplit,
    Stability,
    dominance_certificate,
    index_split,
    nash_ensemble,
    nash_ensemble_multi,
    nash_strategies,
    ulrg_ne_exists,
    variational_stability_check,
)
from .population import (
    EnvironmentMoments,
    LeastSquaresSolution,
    analytic_moments,
    confounder_closed_form,
    erm_solution,
    least_squares,
    pooled_empirical_erm,
    population_moments,
)
from .sem import EnvParams, EnvSample, SemConfig, confounder_only_config, preset, sample_environment

__version__ = "0.1.0"
