from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Optional, List, Dict, Any, Tuple
from datetime import datetime
from pathlib import Path
from enum import Enum
import numpy as np


def _frozen_array(value: Any, dtype=np.float64) -> np.ndarray:
    """Copy into a read-only numpy array"""
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class ArrayModel(BaseModel):
    """Immutable model that may hold numpy arrays"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    def replace(self, **changes):
        """Validated copy with some fields changed"""
        return type(self).model_validate({**dict(self), **changes})


class ScalingMode(str, Enum):
    GLOBAL_MINMAX = "global-minmax"
    PER_SAMPLE_MINMAX = "per-sample-minmax"
    NONE = "none"


class NormalizationOrder(str, Enum):
    NORMALIZE_FIRST = "normalize_first"
    FILTER_FIRST = "filter_first"


class Framework(str, Enum):
    MONITOR = "monitor"
    ONLINE = "online"


class StopReason(str, Enum):
    MAX_EPOCHS = "max_epochs"
    GRAD_TOL = "grad_tol"
    COST_TOL = "cost_tol"
    NUMERICAL_FAILURE = "numerical_failure"


# ---------------------------------------------------------------------------
# Ingest
# ---------------------------------------------------------------------------

class RawRecord(ArrayModel):
    """One 1-second multi-channel vibration recording"""
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _check_values(cls, value):
        array = np.asarray(value, dtype=np.float64)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        if array.ndim != 2 or array.shape[0] == 0 or array.shape[1] == 0:
            raise ValueError(f"record must be a non-empty 2-D matrix, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("record contains non-finite values")
        return _frozen_array(array)

    @property
    def row_count(self) -> int:
        return int(self.values.shape[0])

    @property
    def channel_count(self) -> int:
        return int(self.values.shape[1])


class SampleMeta(BaseModel):
    model_config = ConfigDict(frozen=True)

    timestamp: datetime
    ordinal: int = Field(ge=0)
    source_name: str


class ScalingInfo(BaseModel):
    """How catalog entries were mapped into the autoencoder's [0,1] range"""
    model_config = ConfigDict(frozen=True)

    mode: ScalingMode = ScalingMode.NONE
    min: float = 0.0
    max: float = 1.0
    fit_count: Optional[int] = None

    @model_validator(mode="after")
    def _check_range(self):
        if self.mode != ScalingMode.NONE and not self.max > self.min:
            raise ValueError(f"scaling requires max > min, got min={self.min}, max={self.max}")
        return self


class SampleCatalog(ArrayModel):
    """Time-ordered single-channel vibration vectors of one bearing"""
    metas: Tuple[SampleMeta, ...]
    data: np.ndarray
    bearing_id: str
    channel: int = Field(ge=0)
    scaling: ScalingInfo = Field(default_factory=ScalingInfo)
    change_point: Optional[int] = None

    @field_validator("data", mode="before")
    @classmethod
    def _check_data(cls, value):
        array = np.asarray(value, dtype=np.float64)
        if array.ndim != 2:
            raise ValueError(f"catalog data must be N x L, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("catalog contains non-finite values")
        return _frozen_array(array)

    @model_validator(mode="after")
    def _check_order(self):
        if len(self.metas) != self.data.shape[0]:
            raise ValueError(f"{len(self.metas)} metas for {self.data.shape[0]} samples")
        for position, meta in enumerate(self.metas):
            if meta.ordinal != position:
                raise ValueError(f"ordinal {meta.ordinal} at position {position}")
            if position and not meta.timestamp > self.metas[position - 1].timestamp:
                raise ValueError(f"timestamps not strictly increasing at ordinal {position}")
        return self

    @property
    def n_samples(self) -> int:
        return int(self.data.shape[0])

    @property
    def sample_len(self) -> int:
        return int(self.data.shape[1])

    @property
    def samples(self) -> List[Tuple[SampleMeta, np.ndarray]]:
        return list(zip(self.metas, self.data))

    @property
    def source_names(self) -> List[str]:
        return [meta.source_name for meta in self.metas]


# ---------------------------------------------------------------------------
# Autoencoder
# ---------------------------------------------------------------------------

class AESettings(BaseModel):
    """Autoencoder hyperparameters before the input dimension is known"""
    hidden_dim: int = Field(default=64, gt=0)
    l2_coeff: float = Field(default=0.001, ge=0)
    sparsity_coeff: float = Field(default=1.0, ge=0)
    sparsity_target: float = Field(default=0.05, gt=0, lt=1)
    kl_epsilon: float = Field(default=1e-8, gt=0, lt=0.5)

    def to_config(self, input_dim: int, seed: int = 0) -> "AEConfig":
        return AEConfig(input_dim=input_dim, seed=seed, **self.model_dump(exclude={"input_dim", "seed"}))


class AEConfig(AESettings):
    input_dim: int = Field(gt=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_compression(self):
        if not self.hidden_dim < self.input_dim:
            raise ValueError(f"hidden_dim {self.hidden_dim} must be below input_dim {self.input_dim}")
        return self


class AEParams(ArrayModel):
    """Tied weights: encoder uses W, decoder uses W.T"""
    W: np.ndarray
    b1: np.ndarray
    b2: np.ndarray

    @field_validator("W", "b1", "b2", mode="before")
    @classmethod
    def _finite(cls, value):
        array = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(array)):
            raise ValueError("parameters contain non-finite values")
        return _frozen_array(array)

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.W.ndim != 2:
            raise ValueError(f"W must be 2-D, got shape {self.W.shape}")
        hidden, visible = self.W.shape
        if self.b1.shape != (hidden,) or self.b2.shape != (visible,):
            raise ValueError(
                f"bias shapes {self.b1.shape}, {self.b2.shape} do not match W {self.W.shape}"
            )
        return self

    @property
    def hidden_dim(self) -> int:
        return int(self.W.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.W.shape[1])

    @property
    def size(self) -> int:
        return int(self.W.size + self.b1.size + self.b2.size)


class CostBreakdown(ArrayModel):
    total: float
    mse: float = Field(ge=0)
    l2: float = Field(ge=0)
    sparsity: float = Field(ge=0)
    rho_hat: np.ndarray
    l2_coeff: float
    sparsity_coeff: float

    @field_validator("rho_hat", mode="before")
    @classmethod
    def _rho_range(cls, value):
        array = np.asarray(value, dtype=np.float64)
        if np.any(array < 0) or np.any(array > 1):
            raise ValueError("average activations must lie in [0,1]")
        return _frozen_array(array)

    @model_validator(mode="after")
    def _check_total(self):
        expected = self.mse + self.l2_coeff * self.l2 + self.sparsity_coeff * self.sparsity
        if abs(self.total - expected) > 1e-12 * max(1.0, abs(expected)):
            raise ValueError(f"total {self.total} != decomposition {expected}")
        return self


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

class TrainConfig(BaseModel):
    max_epochs: int = Field(default=400, ge=1)
    grad_tol: float = Field(default=1e-6, ge=0)
    cost_tol: float = Field(default=1e-9, ge=0)
    sigma_scg: float = Field(default=5e-5, gt=0)
    lambda_init: float = Field(default=5e-7, gt=0)
    seed: int = 0
    log_every: int = Field(default=0, ge=0)


class TrainReport(BaseModel):
    epochs_run: int
    cost_history: List[float] = []
    final_grad_norm: float
    stop_reason: StopReason
    initial_cost: float
    final_cost: float
    lambda_final: float
    evaluations: int = 0

    @field_validator("cost_history")
    @classmethod
    def _non_increasing(cls, history: List[float]) -> List[float]:
        for previous, current in zip(history, history[1:]):
            if current > previous:
                raise ValueError(f"accepted cost rose from {previous} to {current}")
        return history


# ---------------------------------------------------------------------------
# AEC series and detection
# ---------------------------------------------------------------------------

class AECSettings(BaseModel):
    w_size: int = Field(default=10, ge=1)
    ref_index: int = Field(default=0, ge=0)
    ref_count: int = Field(default=1, ge=1)
    order: NormalizationOrder = NormalizationOrder.NORMALIZE_FIRST
    min_span: float = Field(default=0.0, ge=0)


class AECSeries(ArrayModel):
    """The health indicator: correlation, normalized rate and filtered rate"""
    raw_corr: np.ndarray
    normalized: np.ndarray
    filtered: np.ndarray
    w_size: int = Field(ge=1)
    ref_index: int = Field(ge=0)
    ref_count: int = 1
    order: NormalizationOrder = NormalizationOrder.NORMALIZE_FIRST
    norm_min: float
    norm_max: float

    @field_validator("raw_corr", "normalized", "filtered", mode="before")
    @classmethod
    def _vector(cls, value):
        return _frozen_array(np.asarray(value, dtype=np.float64).ravel())

    @model_validator(mode="after")
    def _check_lengths(self):
        n = self.raw_corr.shape[0]
        if self.normalized.shape[0] != n or self.filtered.shape[0] != n:
            raise ValueError("series stages must share one length")
        if n and (self.normalized.min() < 0 or self.normalized.max() > 1):
            raise ValueError("normalized rate must lie in [0,1]")
        return self

    @property
    def n_samples(self) -> int:
        return int(self.raw_corr.shape[0])


class DetectorConfig(BaseModel):
    theta: float = Field(default=0.9, gt=0, lt=1)
    lag: int = Field(default=100, ge=1)
    warmup: int = Field(default=0, ge=0)


class DetectionReport(ArrayModel):
    degradation_start: Optional[int] = None
    flags: np.ndarray
    config_echo: DetectorConfig
    series_id: str
    inverted: bool = False

    @field_validator("flags", mode="before")
    @classmethod
    def _bool_flags(cls, value):
        return _frozen_array(np.asarray(value, dtype=bool).ravel(), dtype=bool)

    @model_validator(mode="after")
    def _first_flag(self):
        flagged = np.flatnonzero(self.flags)
        first = int(flagged[0]) if flagged.size else None
        if first != self.degradation_start:
            raise ValueError(f"degradation_start {self.degradation_start} != first flag {first}")
        return self

    @property
    def detected(self) -> bool:
        return self.degradation_start is not None


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

class SynthConfig(BaseModel):
    """Synthetic run-to-failure catalog, regenerated on every run"""
    n_samples: int = Field(default=300, gt=1)
    sample_len: int = Field(default=20480, ge=8)
    change_point: int = 200
    severity_growth: float = Field(default=0.02, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_change_point(self):
        if not 0 < self.change_point < self.n_samples:
            raise ValueError(f"change_point {self.change_point} outside (0, {self.n_samples})")
        return self


class RunConfig(BaseModel):
    dataset_root: Optional[Path] = None
    catalog_path: Optional[Path] = None
    synthetic: Optional[SynthConfig] = None
    bearing: str = "S2B1"
    sensor: int = Field(default=1, ge=1, le=2)
    channel: Optional[int] = Field(default=None, ge=0)
    expected_rows: int = Field(default=20480, gt=0)
    timestamp_format: str = "%Y.%m.%d.%H.%M.%S"
    parse_workers: int = Field(default=4, ge=1)
    decimation: int = Field(default=1, ge=1)
    scaling: ScalingMode = ScalingMode.GLOBAL_MINMAX
    autoencoder: AESettings = Field(default_factory=AESettings)
    training: TrainConfig = Field(default_factory=TrainConfig)
    aec: AECSettings = Field(default_factory=AECSettings)
    detector: DetectorConfig = Field(default_factory=DetectorConfig)
    framework: Framework = Framework.MONITOR
    train_fraction: float = Field(default=0.7, gt=0, le=1)
    output_dir: Path = Path("results")
    reference_ordinal: Optional[int] = Field(default=None, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_framework(self):
        if self.train_fraction == 1 and self.framework != Framework.MONITOR:
            raise ValueError("train_fraction = 1 is only valid for the monitor framework")
        return self


class Provenance(BaseModel):
    config_hash: str
    seed: int
    started_at: datetime
    finished_at: datetime
    resolved_config: Dict[str, Any]
    versions: Dict[str, str] = {}
    n_samples: int
    n_train: int
    input_dim: int


class RunResult(ArrayModel):
    series: AECSeries
    detection: DetectionReport
    train_report: TrainReport
    accuracy: Optional[float] = None
    reference_ordinal: Optional[int] = None
    provenance: Provenance
