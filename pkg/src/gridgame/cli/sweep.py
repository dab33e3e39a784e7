"""Budget sweeps: baseline against double oracle, written as CSV and JSON."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from gridgame.cli.config import ScenarioConfig
from gridgame.game.double_oracle import DOConfig, EquilibriumResult, compute_baseline, double_oracle
from gridgame.grid.flow import FlowState, dc_power_flow
from gridgame.grid.model import PowerNetwork

log = logging.getLogger(__name__)

CSV_COLUMNS = ("budget", "baseline_mw", "equilibrium_mw", "saving_mw", "iterations", "wall_s",
               "broke_grid")
SAVING_TOL = 1e-6


@dataclass(frozen=True)
class SweepRow:
    budget: int
    baseline_mw: float
    equilibrium_mw: float
    saving_mw: float
    iterations: int
    wall_s: float
    broke_grid: bool

    def csv_fields(self) -> list[str]:
        return [str(self.budget), repr(self.baseline_mw), repr(self.equilibrium_mw),
                repr(self.saving_mw), str(self.iterations), f"{self.wall_s:.3f}",
                str(self.broke_grid).lower()]

    def to_dict(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRow":
        return cls(int(d["budget"]), float(d["baseline_mw"]), float(d["equilibrium_mw"]),
                   float(d["saving_mw"]), int(d["iterations"]), float(d["wall_s"]),
                   bool(d["broke_grid"]))


@dataclass
class SweepReport:
    scenario: str
    rows: list[SweepRow]
    details: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_fields())
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "config": self.config,
                "rows": [r.to_dict() for r in self.rows], "details": self.details}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepReport":
        return cls(d.get("scenario", "scenario"), [SweepRow.from_dict(r) for r in d["rows"]],
                   d.get("details", []), d.get("config", {}))

    @classmethod
    def load(cls, path: Path | str) -> "SweepReport":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".csv":
            rows = [SweepRow.from_dict({**r, "broke_grid": r["broke_grid"] == "true"})
                    for r in csv.DictReader(io.StringIO(text))]
            return cls(path.stem, rows)
        return cls.from_dict(json.loads(text))

    def write(self, out_dir: Path, stem: str | None = None) -> tuple[Path, Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or self.scenario
        csv_path, json_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.json"
        csv_path.write_text(self.to_csv())
        json_path.write_text(self.to_json())
        return csv_path, json_path


@dataclass
class _Prepared:
    network: PowerNetwork
    flows: FlowState


def prepare(config: ScenarioConfig) -> _Prepared:
    net = config.load_network()
    config.check_against(net)
    return _Prepared(net, dc_power_flow(net, coherency=config.coherency))


def do_config(config: ScenarioConfig) -> DOConfig:
    return DOConfig(epsilon=config.epsilon, oracle=config.oracle_mode, backend=config.backend,
                    max_iterations=config.max_iterations)


def run_budget(config: ScenarioConfig, prep: _Prepared, budget: int
               ) -> tuple[SweepRow, dict, EquilibriumResult]:
    t0 = time.perf_counter()
    op, adv, base_value = compute_baseline(prep.network, config.coherency, prep.flows, budget,
                                           backend=config.backend)
    res = double_oracle(prep.network, config.coherency, prep.flows, budget, do_config(config),
                        baseline=op)
    wall = time.perf_counter() - t0
    row = SweepRow(budget, base_value, res.value_mw, base_value - res.value_mw, res.iterations,
                   wall, res.broke_grid)
    detail = {"budget": budget,
              "baseline": {"operator_action": op.to_dict(), "adversary_response": adv.to_dict(),
                           "value_mw": base_value},
              "equilibrium": res.to_dict()}
    return row, detail, res


def run_sweep(config: ScenarioConfig) -> SweepReport:
    """Baseline and equilibrium for each budget, in increasing order.

    With ``stop_at_breakdown`` the sweep ends at the first budget whose
    attacks leave the operator no proper islanding.
    """
    prep = prepare(config)
    rows, details = [], []
    for c in sorted(set(config.budgets)):
        row, detail, _ = run_budget(config, prep, c)
        log.info("C=%d baseline=%.3f equilibrium=%.3f iterations=%d (%.2fs)",
                 c, row.baseline_mw, row.equilibrium_mw, row.iterations, row.wall_s)
        rows.append(row)
        details.append(detail)
        if row.broke_grid and config.stop_at_breakdown:
            log.info("grid breakdown at C=%d; sweep stopped", c)
            break
    return SweepReport(config.name, rows, details, config.to_dict())


@dataclass(frozen=True)
class Summary:
    scenarios: int
    breakdown_scenarios: int
    percent_better: float          # over non-breakdown scenarios
    mean_saving_mw: float          # over non-breakdown scenarios
    percent_better_all: float      # over every scenario
    mean_saving_all_mw: float
    max_iterations: int
    max_wall_s: float

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in self.__dict__.items()}

    def render(self) -> str:
        def pct(x):
            return "n/a" if math.isnan(x) else f"{x:.1f}%"

        def mw(x):
            return "n/a" if math.isnan(x) else f"{x:.3f} MW"

        ok = self.scenarios - self.breakdown_scenarios
        return "\n".join([
            f"scenarios: {self.scenarios} ({self.breakdown_scenarios} with grid breakdown)",
            f"better than baseline: {pct(self.percent_better)} of {ok} non-breakdown scenarios, "
            f"{pct(self.percent_better_all)} of all",
            f"mean saving: {mw(self.mean_saving_mw)} over non-breakdown scenarios, "
            f"{mw(self.mean_saving_all_mw)} over all",
            f"max iterations: {self.max_iterations}",
            f"max wall time: {self.max_wall_s:.2f} s",
        ])


def _stats(rows: Sequence[SweepRow], tol: float) -> tuple[float, float]:
    if not rows:
        return math.nan, math.nan
    better = sum(r.saving_mw > tol for r in rows)
    return 100.0 * better / len(rows), sum(r.saving_mw for r in rows) / len(rows)


def summarize(reports: Sequence[SweepReport], tol: float = SAVING_TOL) -> Summary:
    """Aggregate savings, iteration counts and run times across reports."""
    if not reports:
        raise ValueError("summarize needs at least one report")
    rows = [r for rep in reports for r in rep.rows]
    intact = [r for r in rows if not r.broke_grid]
    pct, mean = _stats(intact, tol)
    pct_all, mean_all = _stats(rows, tol)
    return Summary(
        scenarios=len(rows),
        breakdown_scenarios=len(rows) - len(intact),
        percent_better=pct,
        mean_saving_mw=mean,
        percent_better_all=pct_all,
        mean_saving_all_mw=mean_all,
        max_iterations=max((r.iterations for r in rows), default=0),
        max_wall_s=max((r.wall_s for r in rows), default=0.0),
    )
