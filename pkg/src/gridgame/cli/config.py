"""Scenario configuration files."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from gridgame.errors import DataError, InvalidCoherency
from gridgame.grid.io import bundled_case, load_network
from gridgame.grid.model import CoherencyConfig, PowerNetwork

ORACLE_MODES = ("exact", "greedy")
BUNDLED_PREFIX = "bundled:"


class CaseNotFound(DataError, FileNotFoundError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment: a case, its coherent groups and the budgets to sweep.

    ``case_path`` is either a file path (resolved against ``base_dir``) or
    ``bundled:<name>`` for one of the shipped IEEE cases.
    """
    case_path: str
    coherency: CoherencyConfig
    budgets: tuple[int, ...]
    epsilon: float = 1e-6
    oracle_mode: str = "exact"
    output_dir: str = "out"
    seed: int = 0
    name: str = "scenario"
    stop_at_breakdown: bool = True
    backend: str = "builtin"
    max_iterations: int | None = None
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        if not self.budgets:
            raise ValueError("budgets must be nonempty")
        if any(int(c) != c or c < 0 for c in self.budgets):
            raise ValueError(f"budgets must be non-negative integers, got {list(self.budgets)}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.oracle_mode not in ORACLE_MODES:
            raise ValueError(f"oracle_mode must be one of {ORACLE_MODES}, got {self.oracle_mode!r}")

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | str = ".") -> "ScenarioConfig":
        try:
            coherency = CoherencyConfig.from_dict(d["coherency"])
            case_path = d["case_path"]
            budgets = d["budgets"]
        except KeyError as exc:
            raise ValueError(f"scenario config is missing field {exc.args[0]!r}") from None
        return cls(
            case_path=case_path,
            coherency=coherency,
            budgets=tuple(int(c) for c in budgets),
            epsilon=float(d.get("epsilon", 1e-6)),
            oracle_mode=d.get("oracle_mode", "exact"),
            output_dir=d.get("output_dir", "out"),
            seed=int(d.get("seed", 0)),
            name=d.get("name", Path(str(case_path)).stem),
            stop_at_breakdown=bool(d.get("stop_at_breakdown", True)),
            backend=d.get("backend", "builtin"),
            max_iterations=d.get("max_iterations"),
            base_dir=Path(base_dir),
        )

    @classmethod
    def load(cls, path: Path | str) -> "ScenarioConfig":
        path = Path(path)
        if not path.is_file():
            raise CaseNotFound(f"config file not found: {path}")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(d, base_dir=path.parent)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "case_path": self.case_path,
            "coherency": self.coherency.to_dict(),
            "budgets": list(self.budgets),
            "epsilon": self.epsilon,
            "oracle_mode": self.oracle_mode,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "stop_at_breakdown": self.stop_at_breakdown,
            "backend": self.backend,
            "max_iterations": self.max_iterations,
        }

    def with_overrides(self, **kw) -> "ScenarioConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    @property
    def resolved_output_dir(self) -> Path:
        # relative to the working directory, so bundled scenarios never write into the package
        return Path(self.output_dir).resolve()

    def load_network(self) -> PowerNetwork:
        if self.case_path.startswith(BUNDLED_PREFIX):
            name = self.case_path[len(BUNDLED_PREFIX):]
            try:
                return bundled_case(name)
            except FileNotFoundError:
                raise CaseNotFound(f"case file not found: no bundled case {name!r}") from None
        path = Path(self.case_path)
        if not path.is_absolute():
            path = self.base_dir / path
        if not path.is_file():
            raise CaseNotFound(f"case file not found: {path}")
        return load_network(path)

    def check_against(self, network: PowerNetwork) -> None:
        """Budget range and coherency checks that need the network itself."""
        too_big = [c for c in self.budgets if c > network.n_bus]
        if too_big:
            raise ValueError(f"budgets {too_big} exceed the {network.n_bus} substations of {network.name}")
        self.coherency.validate_for(network)
