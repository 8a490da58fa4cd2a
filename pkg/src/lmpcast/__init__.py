"""Probabilistic LMP and congestion forecasting via multiparametric DC-OPF."""
from .cases import random_case, three_bus, wind_case
from .dcrg import DcrgCache, dcrg_simulate, direct_simulate
from .errors import (BudgetExceededError, CaseError, DegenerateActiveSetError,
                     DisconnectedNetworkError, EmptyRegionError, InfeasibleError,
                     LmpcastError, SolverError, UnboundedError)
from .explore import enumerate_regions
from .mpp import MppProblem, build_mpp
from .network import (ConstraintSchedule, ContingencyModel, GridCase, SystemSnapshot,
                      apply_contingency, compute_shift_factors, load_case, make_snapshot,
                      snapshot_at)
from .opf import DispatchSolution, extract_congestion, extract_lmp, solve_dcopf
from .evaluation import brier_score, reliability_diagram, run_trajectory_experiment
from .forecast import (ForecastDistribution, forecast_regions, forecast_with_contingencies,
                       mix_forecasts)
from .regions import (CriticalRegion, RegionStore, locate, optimal_partition,
                      region_from_active_set_linear, region_from_active_set_quadratic)

from .stochastic import ScenarioModel, conditional_law, sample_paths

__version__ = "0.1.0"
