"""Moderately interacting flocking particles and their mean-field coupling."""
__version__ = "0.1.0"

from .coupling import (CouplingReport, Schedule, SweepReport, alignment_gap, coupled_paths,
                       coupled_run, fit_rate, sweep, xi_schedule)
from .exceptions import (BlowupError, ConfigError, DegenerateSampleError, InvalidParameterError,
                         InvalidStateError)
from .initial import InitialLaw, sample_initial
from .mckean_vlasov import FrozenFlow, PicardReport, picard_solve
from .noise import NoisePlan
from .particles import Params, PhaseEnsemble, Trajectory, Xi, drift, em_step, simulate
