# filename: parsers/config_parser.py
"""
Experiment configuration: one JSON document parsed into ExperimentConfig.

Example:
    {
      "dims": {"M": 3, "N": 3, "H": 2, "H0": 1},
      "n_grid": [100, 200, 400, 800],
      "replicates": 30,
      "master_seed": 7,
      "sampler": {"sweeps": 500, "thin": 5},
      "estimator": {"num_samples": 2000000}
    }
"""
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from config import (
    DEFAULT_DELTA, MH_PROPOSAL_SCALE, MH_STEPS, MIN_MH_STEPS, MIN_REPLICATES, OUTPUT_DIR,
)
from logger import get_logger
from processors.gibbs_sampler import SamplerConfig
from processors.volume_estimator import SMF_OBJECTIVES, VolumeScalingConfig
from state.models import DocumentMode, EstimationMethod, ModelDims, ObservationModel
from utils.errors import ConfigError

logger = get_logger(__name__)

TOP_LEVEL_KEYS = {
    "dims", "delta", "doc_dist", "truth_file", "n_grid", "replicates", "method", "doc_mode",
    "observation_model", "sampler", "metropolis", "estimator", "master_seed", "workers", "output_dir",
}
SAMPLER_KEYS = {"sweeps", "burnin", "thin", "alpha", "beta", "check_consistency"}
METROPOLIS_KEYS = {"steps", "proposal_scale", "support_delta"}
ESTIMATOR_KEYS = {"num_samples", "t_grid", "include_log_term", "min_hits", "batch_size", "objective"}


@dataclass
class MetropolisConfig:
    steps: int = MH_STEPS
    proposal_scale: float = MH_PROPOSAL_SCALE
    support_delta: Optional[float] = None

    def __post_init__(self):
        if self.steps < MIN_MH_STEPS:
            raise ConfigError(f"metropolis.steps must be >= {MIN_MH_STEPS}, got {self.steps}")
        if self.proposal_scale <= 0:
            raise ConfigError(f"metropolis.proposal_scale must be positive, got {self.proposal_scale}")
        if self.support_delta is not None and not 0.0 <= self.support_delta < 0.5:
            raise ConfigError(f"metropolis.support_delta must lie in [0, 1/2), got {self.support_delta}")

    def to_dict(self) -> Dict[str, Any]:
        return {"steps": self.steps, "proposal_scale": self.proposal_scale, "support_delta": self.support_delta}


@dataclass
class ExperimentConfig:
    dims: ModelDims
    n_grid: List[int]
    replicates: int = MIN_REPLICATES
    delta: float = DEFAULT_DELTA
    doc_dist: Optional[List[float]] = None
    truth_file: Optional[str] = None
    method: EstimationMethod = EstimationMethod.GEN_ERROR
    doc_mode: DocumentMode = DocumentMode.SAMPLED
    observation_model: Optional[ObservationModel] = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    metropolis: MetropolisConfig = field(default_factory=MetropolisConfig)
    estimator: VolumeScalingConfig = field(default_factory=VolumeScalingConfig)
    objective: str = "sq_error"
    master_seed: int = 0
    workers: int = 1
    output_dir: str = OUTPUT_DIR

    def __post_init__(self):
        if not self.n_grid:
            raise ConfigError("n_grid must not be empty")
        if any(isinstance(n, bool) or not isinstance(n, int) or n < 1 for n in self.n_grid):
            raise ConfigError(f"n_grid entries must be positive integers, got {self.n_grid}")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError(f"n_grid must be strictly increasing, got {self.n_grid}")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if self.replicates < MIN_REPLICATES and self.method is EstimationMethod.GEN_ERROR:
            logger.warning(f"Config: {self.replicates} replicates is below {MIN_REPLICATES}; "
                           f"confidence intervals will be unreliable")
        if not 0.0 < self.delta < 0.5:
            raise ConfigError(f"delta must lie in (0, 1/2), got {self.delta}")
        if self.doc_dist is not None:
            q = np.asarray(self.doc_dist, dtype=float)
            if q.shape != (self.dims.N,) or np.any(q <= 0) or abs(q.sum() - 1.0) > 1e-10:
                raise ConfigError(f"doc_dist must be {self.dims.N} positive weights summing to 1")
        if self.objective not in SMF_OBJECTIVES:
            raise ConfigError(f"Unknown estimator objective '{self.objective}'; choose from {sorted(SMF_OBJECTIVES)}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.master_seed < 0:
            raise ConfigError(f"master_seed must be non-negative, got {self.master_seed}")

    def to_dict(self) -> Dict[str, Any]:
        estimator = self.estimator.to_dict()
        estimator.pop("seed")
        estimator.pop("workers")
        estimator["objective"] = self.objective
        return {
            "dims": self.dims.to_dict(),
            "n_grid": list(self.n_grid),
            "replicates": self.replicates,
            "delta": self.delta,
            "doc_dist": self.doc_dist,
            "truth_file": self.truth_file,
            "method": self.method.value,
            "doc_mode": self.doc_mode.value,
            "observation_model": self.observation_model.value if self.observation_model else None,
            "sampler": self.sampler.to_dict(),
            "metropolis": self.metropolis.to_dict(),
            "estimator": estimator,
            "master_seed": self.master_seed,
            "workers": self.workers,
            "output_dir": self.output_dir,
        }

    def volume_config(self) -> VolumeScalingConfig:
        return replace(self.estimator, seed=self.master_seed, workers=self.workers)

    def with_overrides(self, seed: Optional[int] = None, output_dir: Optional[str] = None,
                       workers: Optional[int] = None, method: Optional[str] = None) -> "ExperimentConfig":
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes["master_seed"] = int(seed)
        if output_dir is not None:
            changes["output_dir"] = str(output_dir)
        if workers is not None:
            changes["workers"] = int(workers)
        if method is not None:
            changes["method"] = _enum(EstimationMethod, method, "method")
        return replace(self, **changes) if changes else self


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON of the config; output_dir does not affect results."""
    payload = config.to_dict()
    payload.pop("output_dir")
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _check_keys(section: str, payload: Dict[str, Any], allowed: set) -> None:
    if not isinstance(payload, dict):
        raise ConfigError(f"'{section}' must be a JSON object, got {type(payload).__name__}")
    unknown = sorted(set(payload) - allowed)
    if unknown:
        raise ConfigError(f"Unknown key(s) in '{section}': {', '.join(unknown)}")


def _enum(enum_cls, value: Any, name: str):
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"Invalid {name} '{value}'; choose from {choices}") from None


def parse_config(payload: Dict[str, Any]) -> ExperimentConfig:
    """Validates a decoded JSON config; every problem surfaces as ConfigError."""
    _check_keys("config", payload, TOP_LEVEL_KEYS)
    for required in ("dims", "n_grid"):
        if required not in payload:
            raise ConfigError(f"Missing required key '{required}'")
    dims_payload = payload["dims"]
    _check_keys("dims", dims_payload, {"M", "N", "H", "H0"})
    try:
        dims = ModelDims(**dims_payload)
        sampler_payload = payload.get("sampler", {})
        _check_keys("sampler", sampler_payload, SAMPLER_KEYS)
        metropolis_payload = payload.get("metropolis", {})
        _check_keys("metropolis", metropolis_payload, METROPOLIS_KEYS)
        estimator_payload = dict(payload.get("estimator", {}))
        _check_keys("estimator", estimator_payload, ESTIMATOR_KEYS)
        objective = estimator_payload.pop("objective", "sq_error")
        if estimator_payload.get("t_grid") is None:
            estimator_payload.pop("t_grid", None)
        model = payload.get("observation_model")
        return ExperimentConfig(
            dims=dims,
            n_grid=list(payload["n_grid"]),
            replicates=int(payload.get("replicates", MIN_REPLICATES)),
            delta=float(payload.get("delta", DEFAULT_DELTA)),
            doc_dist=payload.get("doc_dist"),
            truth_file=payload.get("truth_file"),
            method=_enum(EstimationMethod, payload.get("method", EstimationMethod.GEN_ERROR.value), "method"),
            doc_mode=_enum(DocumentMode, payload.get("doc_mode", DocumentMode.SAMPLED.value), "doc_mode"),
            observation_model=_enum(ObservationModel, model, "observation_model") if model else None,
            sampler=SamplerConfig(**sampler_payload),
            metropolis=MetropolisConfig(**metropolis_payload),
            estimator=VolumeScalingConfig(**estimator_payload),
            objective=objective,
            master_seed=int(payload.get("master_seed", 0)),
            workers=int(payload.get("workers", 1)),
            output_dir=str(payload.get("output_dir") or OUTPUT_DIR),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid config value: {e}") from e


def load_config(path: str) -> ExperimentConfig:
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        payload = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    config = parse_config(payload)
    logger.info(f"Config loaded from {path}: {config.dims.label()}, n_grid={config.n_grid}, "
                f"method={config.method.value}, hash={config_hash(config)[:12]}")
    return config
