import logging
from itertools import groupby
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats

from aec_engine import ma_filter, normalize_minmax
from config import Config
from exceptions import DetectionError, ZeroVarianceError
from ims_ingest import inverse_scale
from models import AECSeries, DetectionReport, DetectorConfig, SampleCatalog, ScalingMode

logger = logging.getLogger(__name__)


class DegradationDetector:
    """Lagged-ratio detector for health indicator series.

    A sample is abnormal when the indicator has fallen below theta times
    its value lag samples earlier. Rising indicators (RMS, kurtosis) use
    the inverted test against (2 - theta) times the lagged value.
    """

    def __init__(self, config: Optional[DetectorConfig] = None):
        self.config = config or DetectorConfig(theta=Config.DETECTION_THETA, lag=Config.DETECTION_LAG)

    def _check(self, series: np.ndarray) -> None:
        if series.ndim != 1:
            raise DetectionError(f"series must be 1-D, got shape {series.shape}")
        if series.shape[0] <= self.config.lag:
            raise DetectionError(f"series of {series.shape[0]} samples is not longer than lag {self.config.lag}")
        if not np.all(np.isfinite(series)):
            raise DetectionError("series contains non-finite values")

    def flags(self, series, inverted: bool = False) -> np.ndarray:
        series = np.asarray(series, dtype=np.float64)
        self._check(series)
        cfg = self.config
        start = max(cfg.warmup, cfg.lag)
        current, lagged = series[start:], series[start - cfg.lag:series.shape[0] - cfg.lag]

        flags = np.zeros(series.shape[0], dtype=bool)
        if inverted:
            flags[start:] = current > (2.0 - cfg.theta) * lagged
        else:
            flags[start:] = current < cfg.theta * lagged
        return flags

    def detect(self, series, series_id: str = "aec", inverted: bool = False) -> DetectionReport:
        flags = self.flags(series, inverted)
        flagged = np.flatnonzero(flags)
        start = int(flagged[0]) if flagged.size else None
        if start is None:
            logger.info("%s: no degradation detected (theta %.2f, lag %d)", series_id, self.config.theta, self.config.lag)
        else:
            logger.info("%s: degradation starts at sample %d", series_id, start)
        return DetectionReport(
            degradation_start=start,
            flags=flags,
            config_echo=self.config,
            series_id=series_id,
            inverted=inverted,
        )

    def verify(self, series, report: DetectionReport) -> None:
        """Recompute the flags sample by sample and compare with the report"""
        series = np.asarray(series, dtype=np.float64)
        cfg = report.config_echo
        start = max(cfg.warmup, cfg.lag)
        for t, flag in enumerate(report.flags):
            if t < start:
                expected = False
            elif report.inverted:
                expected = bool(series[t] > (2.0 - cfg.theta) * series[t - cfg.lag])
            else:
                expected = bool(series[t] < cfg.theta * series[t - cfg.lag])
            if bool(flag) != expected:
                raise DetectionError(f"{report.series_id}: flag at sample {t} is {bool(flag)}, rule gives {expected}")


def detect_degradation(series,
                       config: Optional[DetectorConfig] = None,
                       series_id: str = "aec") -> DetectionReport:
    return DegradationDetector(config).detect(series, series_id)


def verify_report(series, report: DetectionReport) -> None:
    DegradationDetector(report.config_echo).verify(series, report)


def prediction_accuracy(predicted: int, reference: int, n_samples: int) -> float:
    """1 - |predicted - reference| / n_samples"""
    if n_samples <= 0:
        raise DetectionError(f"n_samples must be positive, got {n_samples}")
    for name, value in (("predicted", predicted), ("reference", reference)):
        if not 0 <= value < n_samples:
            raise DetectionError(f"{name} ordinal {value} outside 0..{n_samples - 1}")
    return 1.0 - abs(predicted - reference) / n_samples


def days_to_ordinals(days: float, samples_per_day: int = Config.SAMPLES_PER_DAY) -> int:
    """Convert a time difference in days to a sample count at the 10-minute cadence"""
    return int(round(days * samples_per_day))


def flags_rle(flags) -> List[List]:
    """Run-length encoding [[flag, count], ...] of a flag vector"""
    return [[bool(value), sum(1 for _ in run)] for value, run in groupby(np.asarray(flags, dtype=bool).tolist())]


# ---------------------------------------------------------------------------
# Baseline indicators
# ---------------------------------------------------------------------------

def _raw_amplitudes(catalog: SampleCatalog) -> np.ndarray:
    if catalog.scaling.mode == ScalingMode.NONE:
        return catalog.data
    return inverse_scale(catalog)


def rms_series(catalog: SampleCatalog) -> np.ndarray:
    """Root mean square of every raw sample"""
    data = _raw_amplitudes(catalog)
    return np.sqrt(np.mean(data ** 2, axis=1))


def kurtosis_series(catalog: SampleCatalog) -> np.ndarray:
    """Pearson (non-excess) kurtosis of every raw sample"""
    data = _raw_amplitudes(catalog)
    flat = np.flatnonzero(np.ptp(data, axis=1) == 0)
    if flat.size:
        ordinal = int(flat[0])
        raise ZeroVarianceError(f"sample {ordinal} is constant, kurtosis undefined", role="sample", ordinal=ordinal)
    return stats.kurtosis(data, axis=1, fisher=False, bias=True)


def baseline_report(values,
                    config: Optional[DetectorConfig] = None,
                    w_size: int = 10,
                    series_id: str = "rms") -> Tuple[AECSeries, DetectionReport]:
    """Run a rising indicator through the same normalize, filter and detect chain"""
    values = np.asarray(values, dtype=np.float64)
    normalized = normalize_minmax(values)
    filtered = ma_filter(normalized, w_size)
    series = AECSeries(
        raw_corr=values,
        normalized=normalized,
        filtered=filtered,
        w_size=w_size,
        ref_index=0,
        norm_min=float(values.min()),
        norm_max=float(values.max()),
    )
    detector = DegradationDetector(config)
    report = detector.detect(filtered, series_id, inverted=True)
    detector.verify(filtered, report)
    return series, report
