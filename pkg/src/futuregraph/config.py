"""Dataclass configs for model sizes, training and ablation masks."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .graphs import DEFAULT_F_AOI, DEFAULT_N_F
from .world import WorldConfig


@dataclass
class ModelDims:
    f_aoi: int = DEFAULT_F_AOI
    n_f: int = DEFAULT_N_F
    c: int = 32
    c_h: int = 32
    heads: int = 8
    m_nodes: int = 16
    mlp_ratio: int = 4
    head_hidden: int = 64
    sim_hidden: int = 32
    sim_mlp_hidden: int = 64


@dataclass(frozen=True)
class AblationMask:
    use_ongoing: bool = True
    use_global: bool = True
    use_cross_attention: bool = True
    use_adaptive_learning: bool = True

    def label(self) -> str:
        marks = [self.use_ongoing, self.use_global, self.use_cross_attention, self.use_adaptive_learning]
        return "".join("x" if m else "-" for m in marks)


# Row order of the ablation table: ongoing, global, cross attention, adaptive learning.
ABLATION_ROWS = (
    AblationMask(False, False, False, False),
    AblationMask(True, False, False, False),
    AblationMask(False, True, False, False),
    AblationMask(True, True, False, False),
    AblationMask(True, True, True, False),
    AblationMask(True, True, True, True),
)


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    lam: float = 0.1
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    ablation_mask: AblationMask = field(default_factory=AblationMask)
    direction: str = "global_query"
    finetune_sim: bool = False
    dims: ModelDims = field(default_factory=ModelDims)

    def __post_init__(self):
        if isinstance(self.ablation_mask, dict):
            self.ablation_mask = AblationMask(**self.ablation_mask)
        if isinstance(self.dims, dict):
            self.dims = ModelDims(**self.dims)

    def violations(self) -> list[str]:
        out = []
        if not self.learning_rate > 0:
            out.append("learning_rate must be positive")
        if self.lam < 0:
            out.append("lam must be nonnegative")
        if self.epochs < 1 or self.batch_size < 1:
            out.append("epochs and batch_size must be >= 1")
        if self.direction not in ("global_query", "ongoing_query"):
            out.append("direction must be global_query or ongoing_query")
        if self.dims.c % self.dims.heads:
            out.append("model width c must be divisible by heads")
        return out

    def check(self) -> None:
        bad = self.violations()
        if bad:
            raise ValueError("invalid train config: " + "; ".join(bad))

    @property
    def effective_lambda(self) -> float:
        return self.lam if self.ablation_mask.use_adaptive_learning else 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in fields(cls)}


class ConfigError(ValueError):
    pass


def _strict(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    return data


@dataclass
class RunConfig:
    """Everything one pipeline run needs; ``seed`` (when set) drives world, simulator and model."""

    world: WorldConfig = field(default_factory=WorldConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int | None = None
    minutes: int = 9000
    split: tuple[float, float, float] = (0.66, 0.17, 0.17)
    sim_epochs: int = 80
    sim_patience: int = 12
    sim_learning_rate: float = 1e-3
    ablation_seeds: tuple[int, ...] = (0, 1, 2)
    data_dir: str = "data"
    out_dir: str = "runs"

    def __post_init__(self):
        self.split = tuple(float(x) for x in self.split)
        self.ablation_seeds = tuple(int(x) for x in self.ablation_seeds)
        if self.seed is not None:
            self.world = replace(self.world, seed=self.seed)
            self.train = replace(self.train, seed=self.seed)

    @property
    def sim_seed(self) -> int:
        return self.train.seed

    def violations(self) -> list[str]:
        out = self.world.violations() + self.train.violations()
        if self.minutes < 1:
            out.append("minutes must be >= 1")
        if len(self.split) != 3 or any(x < 0 for x in self.split) or abs(sum(self.split) - 1.0) > 1e-9:
            out.append("split must be three nonnegative fractions summing to 1")
        if self.sim_epochs < 1 or self.sim_patience < 1:
            out.append("sim_epochs and sim_patience must be >= 1")
        if not self.ablation_seeds:
            out.append("ablation_seeds must not be empty")
        return out

    def check(self) -> None:
        bad = self.violations()
        if bad:
            raise ConfigError("invalid run config: " + "; ".join(bad))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(_strict(cls, data, "config"))
        if "world" in data:
            world = dict(_strict(WorldConfig, data["world"], "world"))
            data["world"] = WorldConfig(**world)
        if "train" in data:
            train = dict(_strict(TrainConfig, data["train"], "train"))
            if "dims" in train:
                train["dims"] = ModelDims(**_strict(ModelDims, train["dims"], "train.dims"))
            if "ablation_mask" in train:
                train["ablation_mask"] = AblationMask(**_strict(AblationMask, train["ablation_mask"],
                                                                "train.ablation_mask"))
            data["train"] = TrainConfig(**train)
        try:
            cfg = cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
