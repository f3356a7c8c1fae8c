"""depguard: a proactive dependability runtime for simulated gossip sensor networks."""
from depguard.analysis import (FaultPrediction, FaultType, ThresholdModel, classify, fit_trend,
                               learn_thresholds, predict_faults)
from depguard.adaptation import (DEFAULT_CATALOG, AdaptationAction, PolicyState, Result,
                                 apply_action, resolve_outcome, select_action, update_policy)
from depguard.config import Config, apply_overrides
from depguard.core import (ApplicationLabel, AppState, ControlSettings, CpBounds, Dimension,
                           Feature, Observable)
from depguard.evaluation import AppSpec, RunMetrics, evaluate_application, judge, update_metrics
from depguard.harness import RunReport, compare, run
from depguard.loop import LoopMode, init_loop, run_loop, tick
from depguard.monitor import History, ObservationFrame, sample
from depguard.scenario import BENCHMARKS, Scenario, benchmark, load_scenario, load_scenario_file
from depguard.simulator import (Environment, FaultEvent, InterferenceZone, ScenarioError,
                                apply_controls, compute_rssi, init_network, inject_fault, step)

__version__ = "0.1.0"
