"""Interacting Metropolis chains for growing target sequences, with a
particle-filter baseline, benchmark state-space models, exact discrete-state
verification, and a reproducible experiment harness."""

from .engine import (ChainReservoir, NormConstAccumulator, NormConstEstimates,
                     SimcmcState, accrue, acceptance_rates, empirical_expectation,
                     extend_frontier, init, load_checkpoint, nested_paths,
                     norm_const_estimates, save_checkpoint, staged, sweep,
                     window_start)
from .errors import (BadWeights, Degenerate, InitOutOfSupport, LengthMismatch,
                     LevelOutOfRange, ModeMismatch, NoProposalsYet,
                     NumericalFailure, OriginBearing, OutOfSupport, SimcmcError,
                     ZeroMass)
from .smc import (ParticlePopulation, smc_init, smc_run, smc_step,
                  stratified_resample, weighted_summary)
from .targets import (NEG_INF, ProposalFamily, TargetSequence,
                      WeightBoundDiagnostic, acceptance_ratio, check_support,
                      log_weight, observe_weight)

__version__ = "0.1.0"

__all__ = [
    "BadWeights", "ChainReservoir", "Degenerate", "InitOutOfSupport",
    "LengthMismatch", "LevelOutOfRange", "ModeMismatch", "NEG_INF",
    "NoProposalsYet", "NormConstAccumulator", "NormConstEstimates",
    "NumericalFailure", "OriginBearing", "OutOfSupport", "ParticlePopulation",
    "ProposalFamily", "SimcmcError", "SimcmcState", "TargetSequence",
    "WeightBoundDiagnostic", "ZeroMass", "accrue", "acceptance_rates",
    "acceptance_ratio", "check_support", "empirical_expectation",
    "extend_frontier", "init", "load_checkpoint", "log_weight", "nested_paths",
    "norm_const_estimates", "observe_weight", "save_checkpoint", "smc_init",
    "smc_run", "smc_step", "staged", "stratified_resample", "sweep",
    "weighted_summary",
    "window_start", "__version__",
]
