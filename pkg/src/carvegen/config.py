"""Run configuration: a single JSON file plus command-line overrides.

The file is UTF-8 JSON with the keys shown below; every key is optional and
falls back to the documented default. Flags given on the command line win over
file values.

    {
      "corpus_dir": "corpus",
      "train_corpus_dir": null,
      "output_dir": "out",
      "ratios": ["2/5", "3/5", "4/5"],
      "per_ratio_count": 750,
      "seed": 0,
      "jobs": 1,
      "sample_per_ratio": 10,
      "predictor": {
        "kind": "builtin",
        "order": 3,
        "smoothing": 0.1,
        "mode": "greedy",
        "temperature": 1.0,
        "top_k": 16
      },
      "pool": {
        "size": 100,
        "decoy_sources": ["decoys/a.wav", "decoys/b.png"],
        "format_weights": {"wav": 1.0, "png": 1.0}
      },
      "weights": {"chi": 0.01, "jsd": 10.0, "cosine": 10.0}
    }

An external predictor instead uses
    "predictor": {"kind": "external", "command": ["prog", "--flag"], "timeout": 30.0}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .fragments import DEFAULT_RATIOS, parse_ratio
from .matcher import MatchWeights
from .predictor import SamplingPolicy


@dataclass(frozen=True)
class BuiltinPredictorSpec:
    order: int = 3
    smoothing: float = 0.1
    mode: str = "greedy"
    temperature: float = 1.0
    top_k: int = 16

    def __post_init__(self) -> None:
        if self.order < 0:
            raise ConfigError(f"predictor order must be >= 0, got {self.order}")
        if not self.smoothing > 0:
            raise ConfigError(
                f"predictor smoothing must be positive, got {self.smoothing}"
            )
        if self.mode not in ("greedy", "temperature", "top_k"):
            raise ConfigError(f"unknown decoding mode {self.mode!r}")

    def policy(self, seed: int = 0) -> SamplingPolicy:
        return SamplingPolicy(
            mode=self.mode,
            temperature=self.temperature,
            top_k=self.top_k,
            seed=seed,
        )


@dataclass(frozen=True)
class ExternalPredictorSpec:
    command: tuple[str, ...]
    timeout: float = 30.0

    def __post_init__(self) -> None:
        if not self.command:
            raise ConfigError("external predictor command is empty")
        if not self.timeout > 0:
            raise ConfigError(f"timeout must be positive, got {self.timeout}")


@dataclass(frozen=True)
class PoolSpec:
    size: int = 100
    decoy_sources: tuple[Path, ...] = ()
    format_weights: dict[str, float] | None = None

    def __post_init__(self) -> None:
        if self.size < 2:
            raise ConfigError(f"pool size must be at least 2, got {self.size}")


@dataclass(frozen=True)
class RunConfig:
    corpus_dir: Path
    output_dir: Path
    ratios: tuple[Fraction, ...] = DEFAULT_RATIOS
    per_ratio_count: int = 750
    seed: int = 0
    jobs: int = 1
    sample_per_ratio: int = 10
    train_corpus_dir: Path | None = None
    predictor: BuiltinPredictorSpec | ExternalPredictorSpec = field(
        default_factory=BuiltinPredictorSpec
    )
    pool: PoolSpec = field(default_factory=PoolSpec)
    weights: MatchWeights = field(default_factory=MatchWeights)

    def __post_init__(self) -> None:
        for ratio in self.ratios:
            if not 0 < ratio < 1:
                raise ConfigError(f"ratio {ratio} outside (0, 1)")
        if len(set(self.ratios)) != len(self.ratios):
            raise ConfigError("duplicate ratios")
        if self.per_ratio_count < 1:
            raise ConfigError("per_ratio_count must be at least 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.sample_per_ratio < 1:
            raise ConfigError("sample_per_ratio must be at least 1")

    def check_paths(self) -> None:
        if not self.corpus_dir.is_dir():
            raise ConfigError(f"corpus directory {self.corpus_dir} does not exist")
        if self.train_corpus_dir is not None and not self.train_corpus_dir.is_dir():
            raise ConfigError(
                f"training corpus directory {self.train_corpus_dir} does not exist"
            )
        for source in self.pool.decoy_sources:
            if not source.is_file():
                raise ConfigError(f"decoy source {source} does not exist")


def _parse_predictor(doc: dict) -> BuiltinPredictorSpec | ExternalPredictorSpec:
    kind = doc.get("kind", "builtin")
    if kind == "builtin":
        return BuiltinPredictorSpec(
            order=int(doc.get("order", 3)),
            smoothing=float(doc.get("smoothing", 0.1)),
            mode=str(doc.get("mode", "greedy")),
            temperature=float(doc.get("temperature", 1.0)),
            top_k=int(doc.get("top_k", 16)),
        )
    if kind == "external":
        command = doc.get("command")
        if not isinstance(command, list) or not all(
            isinstance(part, str) for part in command
        ):
            raise ConfigError("external predictor command must be a list of strings")
        return ExternalPredictorSpec(
            command=tuple(command), timeout=float(doc.get("timeout", 30.0))
        )
    raise ConfigError(f"unknown predictor kind {kind!r}")


def _parse_weights(doc: dict) -> MatchWeights:
    try:
        return MatchWeights(
            chi_weight=float(doc.get("chi", 0.01)),
            jsd_weight=float(doc.get("jsd", 10.0)),
            cosine_weight=float(doc.get("cosine", 10.0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(doc: dict, *, base_dir: Path | None = None) -> RunConfig:
    """Build a RunConfig from parsed JSON; relative paths resolve against base_dir."""

    def respath(value: str) -> Path:
        p = Path(value)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return p

    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be a JSON object")
    known = {
        "corpus_dir",
        "train_corpus_dir",
        "output_dir",
        "ratios",
        "per_ratio_count",
        "seed",
        "jobs",
        "sample_per_ratio",
        "predictor",
        "pool",
        "weights",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")

    if "corpus_dir" not in doc:
        raise ConfigError("configuration must name a corpus_dir")
    if "output_dir" not in doc:
        raise ConfigError("configuration must name an output_dir")

    try:
        ratios = tuple(
            parse_ratio(str(r)) for r in doc.get("ratios", ["2/5", "3/5", "4/5"])
        )
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad ratio: {exc}") from exc

    pool_doc = doc.get("pool", {})
    fw = pool_doc.get("format_weights")
    pool = PoolSpec(
        size=int(pool_doc.get("size", 100)),
        decoy_sources=tuple(respath(p) for p in pool_doc.get("decoy_sources", [])),
        format_weights={str(k): float(v) for k, v in fw.items()} if fw else None,
    )

    train_dir = doc.get("train_corpus_dir")
    return RunConfig(
        corpus_dir=respath(str(doc["corpus_dir"])),
        output_dir=respath(str(doc["output_dir"])),
        ratios=ratios,
        per_ratio_count=int(doc.get("per_ratio_count", 750)),
        seed=int(doc.get("seed", 0)),
        jobs=int(doc.get("jobs", 1)),
        sample_per_ratio=int(doc.get("sample_per_ratio", 10)),
        train_corpus_dir=None if train_dir is None else respath(str(train_dir)),
        predictor=_parse_predictor(doc.get("predictor", {})),
        pool=pool,
        weights=_parse_weights(doc.get("weights", {})),
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration {path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc, base_dir=path.parent)


def apply_overrides(
    config: RunConfig,
    *,
    seed: int | None = None,
    jobs: int | None = None,
    output_dir: str | Path | None = None,
) -> RunConfig:
    if seed is not None:
        config = replace(config, seed=seed)
    if jobs is not None:
        config = replace(config, jobs=jobs)
    if output_dir is not None:
        config = replace(config, output_dir=Path(output_dir))
    return config


def config_to_dict(config: RunConfig) -> dict:
    """Canonical JSON-ready form, echoed into run outputs for provenance."""
    if isinstance(config.predictor, BuiltinPredictorSpec):
        predictor = {
            "kind": "builtin",
            "order": config.predictor.order,
            "smoothing": config.predictor.smoothing,
            "mode": config.predictor.mode,
            "temperature": config.predictor.temperature,
            "top_k": config.predictor.top_k,
        }
    else:
        predictor = {
            "kind": "external",
            "command": list(config.predictor.command),
            "timeout": config.predictor.timeout,
        }
    return {
        "corpus_dir": str(config.corpus_dir),
        "train_corpus_dir": (
            None
            if config.train_corpus_dir is None
            else str(config.train_corpus_dir)
        ),
        "output_dir": str(config.output_dir),
        "ratios": [str(r) for r in config.ratios],
        "per_ratio_count": config.per_ratio_count,
        "seed": config.seed,
        "jobs": config.jobs,
        "sample_per_ratio": config.sample_per_ratio,
        "predictor": predictor,
        "pool": {
            "size": config.pool.size,
            "decoy_sources": [str(p) for p in config.pool.decoy_sources],
            "format_weights": config.pool.format_weights,
        },
        "weights": {
            "chi": config.weights.chi_weight,
            "jsd": config.weights.jsd_weight,
            "cosine": config.weights.cosine_weight,
        },
    }
