"""Downlink HARQ simulator comparing reactive, fixed-proactive and adaptive retransmission."""

from .engine import RngStreams, run, run_many
from .metrics import MetricsLog, SummaryReport, summarize
from .scenario import Scenario, ScenarioError, load_scenario, load_scenario_file

__all__ = ["RngStreams", "run", "run_many", "MetricsLog", "SummaryReport", "summarize",
           "Scenario", "ScenarioError", "load_scenario", "load_scenario_file"]
__version__ = "0.1.0"
