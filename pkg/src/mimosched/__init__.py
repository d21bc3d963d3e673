"""QoS-aware user scheduling for multi-cell MU-MIMO with joint transmission."""

from .baselines import MshsConfig, SusConfig, mshs_schedule, sus_schedule
from .bcd import BcdConfig, bcd_schedule, default_rho, exhaustive_schedule
from .beamforming import PrecoderError, build_ezf_precoders, build_transceivers
from .estimators import (
    SCHEDULERS,
    BCDScheduler,
    ExhaustiveScheduler,
    MSHSScheduler,
    SUSScheduler,
)
from .experiments import ExperimentSpec, RunReport, compare_schedulers, run_experiment
from .network import NetworkInstance, build_instance
from .rates import (
    Schedule,
    compute_coefficients,
    effective_sum_rate,
    exact_rates,
    satisfaction_rate,
    surrogate_objective,
    surrogate_rates,
)
from .scenario import CarrierConfig, ConfigError, ScenarioConfig, desk_profile

__version__ = "0.1.0"

__all__ = [
    "BCDScheduler", "BcdConfig", "CarrierConfig", "ConfigError", "ExhaustiveScheduler",
    "ExperimentSpec", "MSHSScheduler", "MshsConfig", "NetworkInstance", "PrecoderError",
    "RunReport", "SCHEDULERS", "SUSScheduler", "ScenarioConfig", "Schedule", "SusConfig",
    "bcd_schedule", "build_ezf_precoders", "build_instance", "build_transceivers",
    "compare_schedulers", "compute_coefficients", "default_rho", "desk_profile",
    "effective_sum_rate", "exact_rates", "exhaustive_schedule", "mshs_schedule",
    "run_experiment", "satisfaction_rate", "surrogate_objective", "surrogate_rates",
    "sus_schedule",
]
