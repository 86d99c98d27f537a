"""Flat ``key = value`` pipeline configuration."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from typing import Optional

from .classifiers import MlpHyper
from .errors import ConfigurationError
from .levelset import Schedule, SpeedParams, stability_bound

THRESHOLD_METHODS = ("otsu", "max-entropy", "max-correlation")
CLASSIFIERS = ("knn", "mlp", "both")


@dataclass(frozen=True)
class PipelineConfig:
    # extraction
    enhance: bool = True
    threshold: str = "otsu"
    # level-set speed
    epsilon: float = 0.4
    beta: float = 0.3
    nu: float = 0.2
    theta: float = 0.1
    alpha: float = 1.0
    fm_floor: float = 1e-3
    nu_direction: str = "deflate"
    edge_direction: str = "attract"
    skew_power: int = 3
    gradient_scale: str = "max"
    # level-set schedule
    max_iterations: int = 600
    reinit_period: int = 10
    convergence: float = 1e-3
    band_width: float = 6.0
    time_step: Optional[float] = None
    seed_fraction: float = 0.05
    t0_quantile: float = 0.0
    # features
    levels: int = 16
    literal_mean: bool = False
    roi_min_size: int = 2
    # classifiers
    classifier: str = "both"
    knn_k: int = 7
    mlp_hidden: int = 12
    mlp_learning_rate: float = 2.0
    mlp_epochs: int = 5000
    seed: int = 0
    out: str = "out"

    def __post_init__(self):
        if self.threshold not in THRESHOLD_METHODS:
            raise ConfigurationError(f"threshold must be one of {THRESHOLD_METHODS}")
        if self.classifier not in CLASSIFIERS:
            raise ConfigurationError(f"classifier must be one of {CLASSIFIERS}")
        if self.levels < 2:
            raise ConfigurationError("levels must be >= 2")
        if self.knn_k < 1:
            raise ConfigurationError("knn_k must be >= 1")
        if self.roi_min_size < 2:
            raise ConfigurationError("roi_min_size must be >= 2")
        # construction validates weights and schedule
        params = self.speed_params()
        self.schedule()
        if self.time_step is not None:
            # the bound only tightens once image edges enter
            loosest = stability_bound(params, 0.0)
            if not 0 < self.time_step <= loosest:
                raise ConfigurationError(
                    f"time_step={self.time_step} outside the stable range (0, {loosest:g}]")

    def speed_params(self) -> SpeedParams:
        return SpeedParams(
            epsilon=self.epsilon, beta=self.beta, nu=self.nu, theta=self.theta,
            alpha=self.alpha, fm_floor=self.fm_floor, nu_direction=self.nu_direction,
            edge_direction=self.edge_direction, skew_power=self.skew_power,
            gradient_scale=self.gradient_scale,
        )

    def schedule(self) -> Schedule:
        return Schedule(
            max_iterations=self.max_iterations, reinit_period=self.reinit_period,
            convergence=self.convergence, band_width=self.band_width,
            time_step=self.time_step, seed_fraction=self.seed_fraction,
            t0_quantile=self.t0_quantile,
        )

    def mlp_hyper(self) -> MlpHyper:
        return MlpHyper(learning_rate=self.mlp_learning_rate, epochs=self.mlp_epochs,
                        seed=self.seed, hidden=self.mlp_hidden)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_render(getattr(self, f.name))}\n" for f in fields(self))


def _render(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(name, raw: str, default):
    text = raw.strip()
    if text.lower() in ("none", "") and name == "time_step":
        return None
    if isinstance(default, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or name == "time_step":
            return float(text)
    except ValueError:
        raise ConfigurationError(f"{name}: cannot parse {raw!r}") from None
    return text


def parse_config(text: str, base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name for f in fields(PipelineConfig)}
    changes = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        changes[key] = _coerce(key, value, getattr(base, key))
    return dataclasses.replace(base, **changes)


def load_config(path: Optional[str]) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    with open(path) as fh:
        return parse_config(fh.read())
