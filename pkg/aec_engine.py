"""
AEC health rate: Pearson correlation of each sample's learned features with
the healthy reference sample, min-max normalized to [0,1] and smoothed by a
trailing moving average.
"""

import logging
from collections import deque
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from exceptions import ConfigError, DimensionError, ZeroVarianceError
from models import AECSeries, DetectorConfig, NormalizationOrder

logger = logging.getLogger(__name__)


def _standardize(vector: np.ndarray, role: str, ordinal: Optional[int] = None) -> np.ndarray:
    std = np.std(vector, ddof=1)
    if std == 0:
        label = f"{role} {ordinal}" if ordinal is not None else role
        raise ZeroVarianceError(f"{label} has zero variance", role=role, ordinal=ordinal)
    return (vector - vector.mean()) / std


def _correlate(z_a: np.ndarray, z_b: np.ndarray) -> float:
    return float(np.clip(np.dot(z_a, z_b) / (z_a.shape[0] - 1), -1.0, 1.0))


def pearson(a, b) -> float:
    """Sample Pearson correlation of two equal-length vectors"""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"vectors differ in length ({a.shape[0]} vs {b.shape[0]})")
    if a.shape[0] < 2:
        raise DimensionError("correlation needs at least 2 entries")
    return _correlate(_standardize(a, "first vector"), _standardize(b, "second vector"))


def _standardize_rows(F: np.ndarray) -> np.ndarray:
    if F.ndim != 2 or F.shape[1] < 2:
        raise DimensionError(f"feature matrix must be N x D with D >= 2, got shape {F.shape}")
    stds = F.std(axis=1, ddof=1)
    dead = np.flatnonzero(stds == 0)
    if dead.size:
        ordinal = int(dead[0])
        raise ZeroVarianceError(f"feature row {ordinal} has zero variance (dead encoding)",
                                role="feature row", ordinal=ordinal)
    return (F - F.mean(axis=1, keepdims=True)) / stds[:, None]


def cc_matrix(F) -> np.ndarray:
    """N x N correlation coefficient matrix of the feature rows"""
    F = np.asarray(F, dtype=np.float64)
    Z = _standardize_rows(F)
    upper = np.triu(Z @ Z.T / (F.shape[1] - 1))
    cc = upper + np.triu(upper, 1).T
    np.fill_diagonal(cc, 1.0)
    return np.clip(cc, -1.0, 1.0)


def reference_series(cc: np.ndarray, ref_index: int = 0) -> np.ndarray:
    cc = np.asarray(cc, dtype=np.float64)
    if not 0 <= ref_index < cc.shape[0]:
        raise DimensionError(f"ref_index {ref_index} outside 0..{cc.shape[0] - 1}")
    return cc[:, ref_index].copy()


def reference_correlations(F, ref_index: int = 0, ref_count: int = 1) -> np.ndarray:
    """Correlation of every row with the reference, without the full matrix.

    The reference is row ref_index, or the mean of ref_count rows starting
    there. Each entry depends only on its own row and the reference, so the
    series can be extended one sample at a time.
    """
    F = np.asarray(F, dtype=np.float64)
    if not 0 <= ref_index or ref_index + ref_count > F.shape[0]:
        raise DimensionError(f"reference rows {ref_index}..{ref_index + ref_count - 1} outside 0..{F.shape[0] - 1}")
    Z = _standardize_rows(F)
    z_ref = _standardize(F[ref_index:ref_index + ref_count].mean(axis=0), "reference")
    raw = np.array([_correlate(z_ref, row) for row in Z])
    if ref_count == 1:
        raw[ref_index] = 1.0
    return raw


def apply_bounds(v, low: float, high: float, min_span: float = 0.0) -> np.ndarray:
    """Map v into [0,1] with fixed bounds; the span never drops below min_span"""
    v = np.asarray(v, dtype=np.float64)
    span = high - low
    if span <= 0 and min_span == 0:
        return np.where(v >= high, 1.0, 0.0)
    if min_span > span:
        # anchored at the top so a noise-only series stays near 1
        return np.clip(1.0 - (high - v) / min_span, 0.0, 1.0)
    return np.clip((v - low) / span, 0.0, 1.0)


def normalize_minmax(v, min_span: float = 0.0) -> np.ndarray:
    """(v - min) / (max - min); a constant series maps to all ones"""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise DimensionError("cannot normalize an empty series")
    low, high = float(v.min()), float(v.max())
    if high == low:
        return np.ones_like(v)
    return apply_bounds(v, low, high, min_span)


def ma_filter(y, w_size: int) -> np.ndarray:
    """Trailing moving average, window truncated at the start"""
    if w_size < 1:
        raise ConfigError(f"w_size must be >= 1, got {w_size}")
    return pd.Series(np.asarray(y, dtype=np.float64)).rolling(window=w_size, min_periods=1).mean().to_numpy()


def _bounds(values: np.ndarray) -> Tuple[float, float]:
    return float(values.min()), float(values.max())


def _normalize(values: np.ndarray, bounds: Optional[Tuple[float, float]], min_span: float):
    if bounds is None:
        return normalize_minmax(values, min_span), _bounds(values)
    return apply_bounds(values, *bounds, min_span), tuple(bounds)


def aec_rate(F,
             ref_index: int = 0,
             w_size: int = 10,
             *,
             ref_count: int = 1,
             order: NormalizationOrder = NormalizationOrder.NORMALIZE_FIRST,
             min_span: float = 0.0,
             bounds: Optional[Tuple[float, float]] = None) -> AECSeries:
    """Health rate of every sample.

    Without bounds the normalization spans the whole series. Frozen bounds
    (from a training portion) make the series causal: raw correlations are
    taken row by row against the reference and values outside the bounds
    clip to [0,1]. Bounds apply to the stage being normalized, the raw
    correlation for normalize_first and the smoothed one for filter_first.
    """
    F = np.asarray(F, dtype=np.float64)
    order = NormalizationOrder(order)
    if ref_count == 1 and bounds is None:
        raw = reference_series(cc_matrix(F), ref_index)
    else:
        raw = reference_correlations(F, ref_index, ref_count)
    logger.debug("AEC rate over %d samples, raw correlation in [%.4f, %.4f]", raw.shape[0], raw.min(), raw.max())

    if order == NormalizationOrder.NORMALIZE_FIRST:
        normalized, (norm_min, norm_max) = _normalize(raw, bounds, min_span)
        filtered = ma_filter(normalized, w_size)
    else:
        normalized, _ = _normalize(raw, None, min_span)
        filtered, (norm_min, norm_max) = _normalize(ma_filter(raw, w_size), bounds, min_span)

    return AECSeries(
        raw_corr=raw,
        normalized=normalized,
        filtered=filtered,
        w_size=w_size,
        ref_index=ref_index,
        ref_count=ref_count,
        order=order,
        norm_min=norm_min,
        norm_max=norm_max,
    )


def aec_rate_online(F,
                    n_train: int,
                    ref_index: int = 0,
                    w_size: int = 10,
                    *,
                    ref_count: int = 1,
                    order: NormalizationOrder = NormalizationOrder.NORMALIZE_FIRST,
                    min_span: float = 0.0) -> AECSeries:
    """Causal health rate with normalization bounds frozen on the first n_train samples"""
    F = np.asarray(F, dtype=np.float64)
    if not 1 <= n_train <= F.shape[0]:
        raise DimensionError(f"n_train {n_train} outside 1..{F.shape[0]}")
    if ref_index + ref_count > n_train:
        raise DimensionError("reference rows must lie in the training portion")
    fitted = reference_correlations(F[:n_train], ref_index, ref_count)
    if NormalizationOrder(order) == NormalizationOrder.FILTER_FIRST:
        fitted = ma_filter(fitted, w_size)
    return aec_rate(F, ref_index, w_size, ref_count=ref_count, order=order,
                    min_span=min_span, bounds=_bounds(fitted))


class OnlineAECMonitor:
    """Streaming AEC rate for one bearing.

    Holds the standardized reference features and frozen normalization
    bounds; each update consumes one sample's features and returns its
    raw correlation, normalized rate, filtered rate and abnormality flag.
    Only the normalize-then-filter order is supported.
    """

    def __init__(self,
                 reference: np.ndarray,
                 bounds: Tuple[float, float],
                 w_size: int = 10,
                 detector: Optional[DetectorConfig] = None,
                 min_span: float = 0.0,
                 ref_index: int = 0,
                 ref_count: int = 1):
        if w_size < 1:
            raise ConfigError(f"w_size must be >= 1, got {w_size}")
        self.z_ref = _standardize(np.asarray(reference, dtype=np.float64), "reference")
        self.bounds = bounds
        self.w_size = w_size
        self.detector = detector or DetectorConfig()
        self.min_span = min_span
        self.ref_index = ref_index
        self.ref_count = ref_count
        self._window = deque(maxlen=w_size)
        self.raw: List[float] = []
        self.normalized: List[float] = []
        self.filtered: List[float] = []
        self.flags: List[bool] = []

    @classmethod
    def from_training(cls,
                      F_train,
                      ref_index: int = 0,
                      ref_count: int = 1,
                      w_size: int = 10,
                      detector: Optional[DetectorConfig] = None,
                      min_span: float = 0.0) -> "OnlineAECMonitor":
        F_train = np.asarray(F_train, dtype=np.float64)
        raw = reference_correlations(F_train, ref_index, ref_count)
        reference = F_train[ref_index:ref_index + ref_count].mean(axis=0)
        return cls(reference, _bounds(raw), w_size, detector, min_span, ref_index, ref_count)

    def update(self, features) -> Tuple[float, float, float, bool]:
        t = len(self.raw)
        row = np.asarray(features, dtype=np.float64).ravel()
        if row.shape != self.z_ref.shape:
            raise DimensionError(f"features have {row.shape[0]} entries, reference has {self.z_ref.shape[0]}")
        raw = _correlate(self.z_ref, _standardize(row, "feature row", t))
        normalized = float(apply_bounds(raw, *self.bounds, self.min_span))
        self._window.append(normalized)
        filtered = float(np.mean(self._window))

        cfg = self.detector
        flag = bool(t >= max(cfg.warmup, cfg.lag) and filtered < cfg.theta * self.filtered[t - cfg.lag])

        self.raw.append(raw)
        self.normalized.append(normalized)
        self.filtered.append(filtered)
        self.flags.append(flag)
        return raw, normalized, filtered, flag

    @property
    def degradation_start(self) -> Optional[int]:
        return next((t for t, flag in enumerate(self.flags) if flag), None)

    def series(self) -> AECSeries:
        return AECSeries(
            raw_corr=self.raw,
            normalized=self.normalized,
            filtered=self.filtered,
            w_size=self.w_size,
            ref_index=self.ref_index,
            ref_count=self.ref_count,
            order=NormalizationOrder.NORMALIZE_FIRST,
            norm_min=self.bounds[0],
            norm_max=self.bounds[1],
        )
