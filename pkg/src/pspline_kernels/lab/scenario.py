"""Simulation scenarios and their JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..exceptions import ConfigurationError
from ..fit import FitConfig
from .truths import get_truth

STUDIES = ("equivalence", "bias", "clt", "rate")


@dataclass(frozen=True)
class SimScenario:
    """One Monte Carlo experiment.

    Exactly one of ``alpha``, ``lambda_star`` and ``rate_constant`` fixes the
    smoothing; ``rate_constant`` ``c`` gives ``alpha = c^(2m) n^(-2m/(4m+1))``.
    Likewise the knots come from ``num_intervals`` or from
    ``knot_scale * n^knot_exponent`` rounded to the nearest divisor of ``n``.
    ``n`` is a list (a ladder) for rate studies and an integer otherwise.
    """

    study: str
    truth: str
    n: int | tuple
    degree: int
    penalty_order: int
    sigma: float
    replications: int
    seed: int
    grid: tuple
    num_intervals: int | None = None
    knot_exponent: float | None = None
    knot_scale: float = 1.0
    alpha: float | None = None
    lambda_star: float | None = None
    rate_constant: float | None = None
    name: str = ""
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigurationError(f"study must be one of {STUDIES}, got {self.study!r}")
        get_truth(self.truth)
        ladder = self.n if isinstance(self.n, (list, tuple)) else None
        if ladder is not None:
            object.__setattr__(self, "n", tuple(int(v) for v in ladder))
        elif self.study == "rate":
            raise ConfigurationError("a rate study needs a ladder of sample sizes")
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        if not self.grid or any(not 0 < v < 1 for v in self.grid):
            raise ConfigurationError("grid points must lie strictly inside (0, 1)")
        if self.sigma < 0:
            raise ConfigurationError("sigma must be >= 0")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ConfigurationError("replications must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")
        given = [v is not None for v in (self.alpha, self.lambda_star, self.rate_constant)]
        if sum(given) != 1:
            raise ConfigurationError("give exactly one of alpha, lambda_star, rate_constant")
        if (self.num_intervals is None) == (self.knot_exponent is None):
            raise ConfigurationError("give exactly one of num_intervals, knot_exponent")
        if self.knot_exponent is not None and self.rate_constant is not None:
            m = self.penalty_order
            floor = (2 * m - 1) / (4 * m + 1)
            if self.knot_exponent <= floor:
                raise ConfigurationError(
                    f"knot_exponent must exceed (2m-1)/(4m+1) = {floor:.4g} under rate tuning"
                )
        for n in self.sizes:
            self.fit_config(n)

    @property
    def sizes(self) -> tuple:
        return self.n if isinstance(self.n, tuple) else (self.n,)

    def resolve_num_intervals(self, n: int) -> int:
        if self.num_intervals is not None:
            return int(self.num_intervals)
        return nearest_divisor(n, min(n, self.knot_scale * n ** self.knot_exponent))

    def resolve_alpha(self, n: int, num_intervals: int) -> float:
        m = self.penalty_order
        if self.alpha is not None:
            return float(self.alpha)
        if self.rate_constant is not None:
            return self.rate_constant ** (2 * m) * n ** (-2 * m / (4 * m + 1))
        return self.lambda_star / (n * num_intervals ** (2 * m - 1))

    def fit_config(self, n: int) -> FitConfig:
        K = self.resolve_num_intervals(n)
        alpha = self.resolve_alpha(n, K)
        if not alpha > 0:
            raise ConfigurationError("the smoothing parameter must be positive in simulations")
        return FitConfig.from_alpha(n, K, self.degree, self.penalty_order, alpha)

    def with_updates(self, **changes) -> "SimScenario":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["n"] = list(self.n) if isinstance(self.n, tuple) else self.n
        out["grid"] = list(self.grid)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SimScenario":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        grid = data.get("grid")
        if isinstance(grid, dict):
            data["grid"] = tuple(np.linspace(grid["start"], grid["stop"], int(grid["num"])))
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "SimScenario":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)


def nearest_divisor(n: int, target: float) -> int:
    """Divisor of ``n`` closest to ``target`` (larger one on ties)."""
    divs = [d for d in range(1, int(math.isqrt(n)) + 1) if n % d == 0]
    divs = sorted(set(divs + [n // d for d in divs]))
    return min(divs, key=lambda d: (abs(d - target), -d))


SCENARIO_DIR = Path(__file__).parent / "scenarios"


def shipped_scenario(name: str) -> SimScenario:
    """Load one of the scenario files distributed with the package."""
    path = SCENARIO_DIR / f"{name}.json"
    if not path.exists():
        available = sorted(p.stem for p in SCENARIO_DIR.glob("*.json"))
        raise ConfigurationError(f"no shipped scenario {name!r}; available: {available}")
    return SimScenario.from_json(path)


def load_tolerances() -> dict:
    return json.loads((Path(__file__).parent / "tolerances.json").read_text())
