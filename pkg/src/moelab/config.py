"""Experiment configuration: one flat JSON document, validated before any work.

CLI flags override file values; every run record echoes the resolved config
so a record plus the binary reproduces the run.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

EXPERIMENTS = (
    "channel-check",
    "stationarity",
    "energy-lagrangian",
    "minimality",
    "boundary",
    "benchmark",
    "search",
)


@dataclass
class ExperimentConfig:
    experiment: str = "benchmark"
    d: int = 12
    gamma: float = 1.0
    dt: float = 1e-3
    dt_list: list[float] | None = None
    delta_e: float = 0.3
    s0: float | None = 0.5
    s0_list: list[float] | None = None
    beta: float = 1.0
    beta_list: list[float] | None = None
    seeds: int = 50
    seed_offset: int = 0
    master_seed: int = 12345
    trials: int = 200
    t_step: float = 1e-4
    nodes_per_axis: int = 40
    steps: int = 32
    max_iters: int = 300
    grad_tol: float = 1e-6
    violation_margin: float = 1e-6
    tail_tol: float = 1e-10
    tolerances: dict[str, float] = field(default_factory=dict)
    override_first_order: bool = False
    threads: int = 1
    output_dir: str = "results"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config file must contain a single JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def s0_levels(self) -> list[float]:
        if self.s0_list:
            return list(self.s0_list)
        if self.s0 is None:
            raise ValueError("either s0 or s0_list must be set")
        return [self.s0]

    def beta_levels(self) -> list[float]:
        if self.beta_list:
            return list(self.beta_list)
        return [self.beta]

    def dt_levels(self) -> list[float]:
        if self.dt_list:
            return list(self.dt_list)
        return [self.dt]

    def validate(self) -> list[str]:
        """Return every violated constraint; empty means the config is runnable."""
        problems: list[str] = []
        if self.experiment not in EXPERIMENTS:
            problems.append(
                f"experiment '{self.experiment}' is not one of {', '.join(EXPERIMENTS)}"
            )
        if self.d < 2:
            problems.append(f"d must be >= 2, got {self.d}")
        if not self.gamma > 0:
            problems.append(f"gamma must be > 0, got {self.gamma}")
        for dt in self.dt_levels():
            if not dt > 0:
                problems.append(f"dt must be > 0, got {dt}")
            elif self.gamma * dt > 0.1 and not self.override_first_order:
                problems.append(
                    f"gamma*dt = {self.gamma * dt:.3g} > 0.1 breaks the first-order "
                    "regime (set override_first_order to proceed)"
                )
        if self.dt_list is not None:
            if len(self.dt_list) < 3:
                problems.append("dt_list needs at least 3 values")
            elif any(a <= b for a, b in zip(self.dt_list, self.dt_list[1:])):
                problems.append("dt_list must be strictly decreasing")
        if self.delta_e < 0:
            problems.append(f"delta_e must be >= 0, got {self.delta_e}")
        if self.d >= 2:
            log_d = math.log(self.d)
            for s0 in self.s0_levels() if (self.s0 is not None or self.s0_list) else []:
                if not 0 < s0 < log_d:
                    problems.append(
                        f"s0 = {s0} exceeds max entropy ln d = {log_d:.6f}"
                        if s0 >= log_d
                        else f"s0 = {s0} must be > 0"
                    )
        for beta in self.beta_levels():
            if not beta > 0:
                problems.append(f"beta must be > 0, got {beta}")
        if self.seeds < 1:
            problems.append(f"seeds must be >= 1, got {self.seeds}")
        if self.seed_offset < 0:
            problems.append(f"seed_offset must be >= 0, got {self.seed_offset}")
        if self.trials < 1:
            problems.append(f"trials must be >= 1, got {self.trials}")
        if not self.t_step > 0:
            problems.append(f"t_step must be > 0, got {self.t_step}")
        if self.nodes_per_axis < 2:
            problems.append(f"nodes_per_axis must be >= 2, got {self.nodes_per_axis}")
        if self.steps < 1:
            problems.append(f"steps must be >= 1, got {self.steps}")
        if self.max_iters < 1:
            problems.append(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.grad_tol > 0:
            problems.append(f"grad_tol must be > 0, got {self.grad_tol}")
        if not self.tail_tol > 0:
            problems.append(f"tail_tol must be > 0, got {self.tail_tol}")
        if self.threads < 1:
            problems.append(f"threads must be >= 1, got {self.threads}")
        for name, value in self.tolerances.items():
            if not value > 0:
                problems.append(f"tolerance '{name}' must be > 0, got {value}")
        return problems
