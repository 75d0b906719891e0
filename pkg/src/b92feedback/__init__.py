"""B92 key distribution over a drifting phase reference, with feedback compensation."""
from ._validation import DomainError, wrap_angle
from .channel import (DetectionEvent, EventLog, NoiseTrajectory, Outcome, eval_trajectory,
                      run_transmission, simulate_pulse)
from .config import PRESETS, ConfigError, ScenarioConfig, load_config
from .feedback import (Abstain, ControlEstimate, FastPhaseEstimator, FeedbackConfig,
                       FeedbackController, KickRecord, NoFeedback, SlowPhaseEstimator,
                       control_function, control_slope_at_zero, estimate_fast, estimate_slow,
                       monotone_window)
from .harness import RunSummary, emit_outputs, load_summary, residual_stats, run_scenario
from .quantum import (DensityMatrix2, ProtocolParams, StateVector, drifted_state,
                      orthogonal_state, p_conclusive, p_inconclusive, rotate, signal_state,
                      source_density)
from .security import (SecurityRates, binary_entropy, estimate_rates_from_eps, gain_threshold,
                       lambda_bit, lambda_con, secure_gain)

__version__ = "0.1.0"
