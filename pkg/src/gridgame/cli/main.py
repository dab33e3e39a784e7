"""``gridgame`` command line: solve, baseline, sweep and summarize."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from gridgame.cli.config import ScenarioConfig
from gridgame.cli.sweep import SweepReport, prepare, run_sweep, summarize, do_config
from gridgame.errors import DataError, GridGameError, SolverError
from gridgame.game.double_oracle import compute_baseline, double_oracle

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("gridgame")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _budgets(text: str) -> tuple[int, ...]:
    out = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gridgame", description="Controlled islanding against substation attacks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", type=Path, help="scenario JSON file")
        sp.add_argument("--oracle", choices=("exact", "greedy"), help="adversary oracle")
        sp.add_argument("--epsilon", type=float, help="double-oracle improvement threshold")
        sp.add_argument("--out", type=Path, help="output directory (overrides the config)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="what to print on stdout")
        sp.add_argument("--budgets", type=_budgets, help="budgets to run, e.g. 1-3 or 1,4")
        sp.add_argument("--no-stop", action="store_true",
                        help="keep sweeping after a grid breakdown")
        return sp

    scenario_cmd("solve", "equilibrium per budget")
    scenario_cmd("baseline", "adversary-unaware islanding per budget")
    scenario_cmd("sweep", "baseline and equilibrium per budget, written as CSV and JSON")
    sm = sub.add_parser("summarize", help="aggregate one or more sweep reports")
    sm.add_argument("reports", nargs="+", type=Path, help="sweep .json or .csv files")
    sm.add_argument("--format", choices=("text", "json"), default="text")
    return p


def _config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config)
    cfg = cfg.with_overrides(oracle_mode=args.oracle, epsilon=args.epsilon, budgets=args.budgets,
                             output_dir=str(args.out.resolve()) if args.out else None)
    if args.no_stop:
        cfg = cfg.with_overrides(stop_at_breakdown=False)
    return cfg


def _emit(rows: list[dict], fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(rows, indent=2, sort_keys=True))
        return
    if rows:
        cols = list(rows[0])
        print(",".join(cols))
        for r in rows:
            print(",".join(str(r[c]).lower() if isinstance(r[c], bool) else str(r[c]) for c in cols))


def cmd_sweep(args) -> int:
    cfg = _config(args)
    report = run_sweep(cfg)
    csv_path, json_path = report.write(cfg.resolved_output_dir)
    log.info("wrote %s and %s", csv_path, json_path)
    if args.format == "json":
        print(report.to_json())
    else:
        sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _config(args)
    prep = prepare(cfg)
    rows, details = [], []
    for c in sorted(set(cfg.budgets)):
        res = double_oracle(prep.network, cfg.coherency, prep.flows, c, do_config(cfg))
        rows.append({"budget": c, "equilibrium_mw": res.value_mw, "iterations": res.iterations,
                     "converged": res.converged, "support": len(res.operator_strategy.support),
                     "broke_grid": res.broke_grid, "wall_s": round(res.wall_s, 3)})
        details.append({"budget": c, "equilibrium": res.to_dict()})
        if res.broke_grid and cfg.stop_at_breakdown:
            break
    _write_json(cfg, f"{cfg.name}_solve.json", details)
    _emit(rows, args.format)
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = _config(args)
    prep = prepare(cfg)
    rows, details = [], []
    for c in sorted(set(cfg.budgets)):
        op, adv, value = compute_baseline(prep.network, cfg.coherency, prep.flows, c,
                                          backend=cfg.backend)
        rows.append({"budget": c, "baseline_mw": value,
                     "compromised": " ".join(map(str, sorted(adv.compromised)))})
        details.append({"budget": c, "operator_action": op.to_dict(),
                        "adversary_response": adv.to_dict(), "value_mw": value})
    _write_json(cfg, f"{cfg.name}_baseline.json", details)
    _emit(rows, args.format)
    return EXIT_OK


def _write_json(cfg: ScenarioConfig, fname: str, payload) -> None:
    out = cfg.resolved_output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / fname).write_text(json.dumps({"config": cfg.to_dict(), "results": payload},
                                        indent=2, sort_keys=True))
    log.info("wrote %s", out / fname)


def cmd_summarize(args) -> int:
    reports = []
    for path in args.reports:
        if not path.is_file():
            raise DataError(f"report file not found: {path}")
        reports.append(SweepReport.load(path))
    s = summarize(reports)
    print(json.dumps(s.to_dict(), indent=2) if args.format == "json" else s.render())
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "baseline": cmd_baseline, "sweep": cmd_sweep,
            "summarize": cmd_summarize}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SolverError as exc:
        print(f"gridgame: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (GridGameError, ValueError, OSError) as exc:
        print(f"gridgame: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
