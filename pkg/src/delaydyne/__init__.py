"""Monte Carlo simulation of adaptive phase measurements with feedback delay."""
from .estimators import DyneRecord, accumulate, combine_c, epsilon_estimate, variable_epsilon
from .feedback import (ARG_A, CORRECTED_SIMPLIFIED, HETERODYNE, SIMPLIFIED, VAR_EPS,
                       FeedbackScheme, SchemeKind, next_phase)
from .simcore import DelayLine, NoiseStream, SignalModel, TimeGrid, delay_read
from .stats import (EnsembleConfig, EnsembleSummary, delay_sweep, excess_variance, fit_slope,
                    holevo_variance, inverse_photon_moment, run_ensemble)
from .trajectory import run_block, simulate_trajectory

__version__ = "0.1.0"
