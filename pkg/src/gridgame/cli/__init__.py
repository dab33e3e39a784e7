"""Experiment runner: scenario configs, budget sweeps and the command line."""
from gridgame.cli.config import CaseNotFound, ScenarioConfig
from gridgame.cli.sweep import CSV_COLUMNS, Summary, SweepReport, SweepRow, run_sweep, summarize

__all__ = ["CSV_COLUMNS", "CaseNotFound", "ScenarioConfig", "Summary", "SweepReport", "SweepRow",
           "run_sweep", "summarize"]
