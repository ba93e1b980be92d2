"""
End-to-end AEC runs.

A run resolves one single-channel catalog (synthetic, a saved catalog, or
raw IMS record files), scales it, trains the autoencoder on all samples
(monitoring framework) or on a leading fraction (online framework),
encodes every sample, computes the AEC rate, detects the degradation
starting point and writes the results.
"""

import hashlib
import json
import logging
import math
import platform
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import pydantic
import scipy
import sklearn
from pydantic import ValidationError

from aec_engine import aec_rate, aec_rate_online
from autoencoder import encode_batch
from config import Config, IMS_EXPERIMENTS
from degradation_detector import DegradationDetector, flags_rle, prediction_accuracy
from exceptions import AECError, ConfigError, PipelineError
from ims_ingest import bearing_channel, build_catalog, decimate_catalog, load_catalog, load_dataset_dir, scale_catalog
from models import (AEConfig, AEParams, AECSeries, DetectionReport, Framework, Provenance, RunConfig,
                    RunResult, SampleCatalog, TrainReport)
from sample_data_generator import generate_from_config
from scg_optimizer import init_params, train

logger = logging.getLogger(__name__)

OUTPUT_FILES = ("aec_series.csv", "detection.json", "train_report.json", "provenance.json", "plot_data.csv")


@contextmanager
def stage(name: str):
    """Label any failure inside the block with the pipeline stage"""
    try:
        yield
    except PipelineError:
        raise
    except (AECError, ValidationError, OSError) as exc:
        logger.error("%s stage failed: %s", name, exc)
        raise PipelineError(name, exc) from exc


def resolve_config(config: RunConfig) -> RunConfig:
    """Propagate the run seed and fill the dataset root from the environment"""
    data = config.model_dump()
    data["training"]["seed"] = config.seed
    if data["synthetic"] is not None:
        data["synthetic"]["seed"] = config.seed
    if data["synthetic"] is None and data["catalog_path"] is None and data["dataset_root"] is None and Config.DATASET_ROOT:
        data["dataset_root"] = Path(Config.DATASET_ROOT)
    return RunConfig.model_validate(data)


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(config.model_dump_json().encode()).hexdigest()


def library_versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "scikit-learn": sklearn.__version__,
        "pydantic": pydantic.VERSION,
    }


def load_run_catalog(config: RunConfig) -> SampleCatalog:
    """Catalog of the configured source, decimated"""
    if config.synthetic is not None:
        catalog = generate_from_config(config.synthetic)
    elif config.catalog_path is not None:
        catalog = load_catalog(config.catalog_path)
    elif config.dataset_root is not None:
        files = load_dataset_dir(config.dataset_root, config.expected_rows, config.parse_workers)
        channel = config.channel
        if channel is None:
            channel = bearing_channel(config.bearing, files[0][1].channel_count, config.sensor)
        catalog = build_catalog(files, config.bearing, channel, config.timestamp_format)
    else:
        raise ConfigError("no catalog source: set synthetic, catalog_path, dataset_root or AEC_DATASET_ROOT")
    return decimate_catalog(catalog, config.decimation)


def default_reference(config: RunConfig, catalog: SampleCatalog) -> Optional[int]:
    """Explicit reference ordinal, else the generator's change point, else the published one"""
    if config.reference_ordinal is not None:
        return config.reference_ordinal
    if catalog.change_point is not None:
        return catalog.change_point
    experiment = IMS_EXPERIMENTS.get(config.bearing.upper())
    if config.synthetic is None and experiment and experiment["n_samples"] == catalog.n_samples:
        return experiment["monitored"]
    return None


class AECPipeline:
    """One run of the monitoring or online framework"""

    def __init__(self, config: RunConfig):
        self.config = resolve_config(config)

    def split(self, catalog: SampleCatalog) -> int:
        """Number of leading samples the autoencoder is trained on"""
        n = catalog.n_samples
        if self.config.framework == Framework.MONITOR:
            return n
        n_train = math.floor(self.config.train_fraction * n)
        if not 1 <= n_train < n:
            raise ConfigError(f"train_fraction {self.config.train_fraction} leaves {n_train} of {n} samples for training")
        if self.config.aec.ref_index + self.config.aec.ref_count > n_train:
            raise ConfigError("reference samples must lie in the training portion")
        return n_train

    def fit(self, catalog: SampleCatalog, n_train: int) -> Tuple[SampleCatalog, AEConfig, AEParams, TrainReport]:
        cfg = self.config
        with stage("scale"):
            scaled = scale_catalog(catalog, cfg.scaling, fit_count=n_train)
        with stage("train"):
            ae_config = cfg.autoencoder.to_config(scaled.sample_len, seed=cfg.seed)
            params, report = train(init_params(ae_config), scaled.data[:n_train], ae_config, cfg.training)
        return scaled, ae_config, params, report

    def score(self, scaled: SampleCatalog, params: AEParams, n_train: int) -> Tuple[AECSeries, DetectionReport]:
        cfg = self.config
        with stage("encode"):
            features = encode_batch(params, scaled.data)
        with stage("aec"):
            settings = dict(ref_count=cfg.aec.ref_count, order=cfg.aec.order, min_span=cfg.aec.min_span)
            if cfg.framework == Framework.MONITOR:
                series = aec_rate(features, cfg.aec.ref_index, cfg.aec.w_size, **settings)
            else:
                series = aec_rate_online(features, n_train, cfg.aec.ref_index, cfg.aec.w_size, **settings)
        with stage("detect"):
            detector = DegradationDetector(cfg.detector)
            series_id = f"{scaled.bearing_id}-ch{scaled.channel}"
            detection = detector.detect(series.filtered, series_id)
            detector.verify(series.filtered, detection)
        return series, detection

    def run(self) -> RunResult:
        cfg = self.config
        started_at = datetime.now()
        logger.info("Starting %s run (seed %d)", cfg.framework.value, cfg.seed)

        with stage("ingest"):
            catalog = load_run_catalog(cfg)
            n_train = self.split(catalog)

        scaled, ae_config, params, report = self.fit(catalog, n_train)
        series, detection = self.score(scaled, params, n_train)

        reference = default_reference(cfg, catalog)
        accuracy = None
        if detection.detected and reference is not None and reference < catalog.n_samples:
            accuracy = prediction_accuracy(detection.degradation_start, reference, catalog.n_samples)
            logger.info("Accuracy vs reference %d: %.2f%%", reference, 100 * accuracy)

        provenance = Provenance(
            config_hash=config_hash(cfg),
            seed=cfg.seed,
            started_at=started_at,
            finished_at=datetime.now(),
            resolved_config=cfg.model_dump(mode="json"),
            versions=library_versions(),
            n_samples=catalog.n_samples,
            n_train=n_train,
            input_dim=ae_config.input_dim,
        )
        return RunResult(
            series=series,
            detection=detection,
            train_report=report,
            accuracy=accuracy,
            reference_ordinal=reference,
            provenance=provenance,
        )


def _with_framework(config: RunConfig, framework: Framework) -> RunConfig:
    return RunConfig.model_validate({**config.model_dump(), "framework": framework})


def run_monitor(config: RunConfig) -> RunResult:
    """Monitoring framework: train on every sample, retrospective health trend"""
    return AECPipeline(_with_framework(config, Framework.MONITOR)).run()


def run_online(config: RunConfig) -> RunResult:
    """Online framework: train on the leading train_fraction, score the rest causally"""
    if not 0 < config.train_fraction < 1:
        raise ConfigError(f"online runs need 0 < train_fraction < 1, got {config.train_fraction}")
    return AECPipeline(_with_framework(config, Framework.ONLINE)).run()


def run(config: RunConfig) -> RunResult:
    if config.framework == Framework.ONLINE:
        return run_online(config)
    return run_monitor(config)


# ---------------------------------------------------------------------------
# Outputs
# ---------------------------------------------------------------------------

def _write_json(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def detection_payload(result: RunResult) -> Dict[str, Any]:
    detection, series = result.detection, result.series
    return {
        "series_id": detection.series_id,
        "degradation_start": detection.degradation_start,
        "detected": detection.detected,
        "inverted": detection.inverted,
        **detection.config_echo.model_dump(),
        "n_samples": series.n_samples,
        "reference_ordinal": result.reference_ordinal,
        "accuracy": result.accuracy,
        "flags_rle": flags_rle(detection.flags),
        "aec": {
            "ref_index": series.ref_index,
            "ref_count": series.ref_count,
            "w_size": series.w_size,
            "order": series.order.value,
            "norm_min": series.norm_min,
            "norm_max": series.norm_max,
        },
    }


def emit_outputs(result: RunResult, out_dir: Union[str, Path]) -> List[Path]:
    """Write the five result files and return their paths"""
    out_dir = Path(out_dir)
    series, detection = result.series, result.detection
    ordinals = np.arange(series.n_samples)
    paths = [out_dir / name for name in OUTPUT_FILES]

    with stage("emit"):
        out_dir.mkdir(parents=True, exist_ok=True)
        pd.DataFrame({
            "ordinal": ordinals,
            "raw_corr": series.raw_corr,
            "normalized": series.normalized,
            "filtered": series.filtered,
        }).to_csv(paths[0], index=False)
        _write_json(paths[1], detection_payload(result))
        paths[2].write_text(result.train_report.model_dump_json(indent=2) + "\n")
        paths[3].write_text(result.provenance.model_dump_json(indent=2) + "\n")
        pd.DataFrame({
            "ordinal": ordinals,
            "filtered": series.filtered,
            "flag": detection.flags.astype(int),
        }).to_csv(paths[4], index=False)

    logger.info("Wrote %d result files to %s", len(paths), out_dir)
    return paths


def batch_label(config: RunConfig, result: RunResult) -> str:
    label = result.detection.series_id
    return f"{label}-seed{config.seed}" if config.synthetic is not None else label


def run_batch(configs: Iterable[RunConfig]) -> List[RunResult]:
    """Independent runs, each written to <output_dir>/<bearing>-ch<channel>"""
    results = []
    used = set()
    for config in configs:
        result = run(config)
        out_dir = config.output_dir / batch_label(config, result)
        if out_dir in used:
            raise ConfigError(f"two batch runs would write to {out_dir}")
        used.add(out_dir)
        emit_outputs(result, out_dir)
        results.append(result)
    logger.info("Batch of %d runs finished, %d with detection", len(results), sum(r.detection.detected for r in results))
    return results


def replay(provenance_path: Union[str, Path], out_dir: Optional[Union[str, Path]] = None) -> RunResult:
    """Re-execute a run from the resolved configuration in its provenance.json"""
    provenance = Provenance.model_validate_json(Path(provenance_path).read_text())
    config = RunConfig.model_validate(provenance.resolved_config)
    result = run(config)
    if result.provenance.config_hash != provenance.config_hash:
        logger.warning("Replayed configuration hash differs from %s", provenance_path)
    if out_dir is not None:
        emit_outputs(result, out_dir)
    return result


# ---------------------------------------------------------------------------
# Results log
# ---------------------------------------------------------------------------

def summarize_output(out_dir: Union[str, Path], reference_ordinal: Optional[int] = None) -> Dict[str, Any]:
    """Detection summary of a finished run directory, with accuracy when a reference is known"""
    out_dir = Path(out_dir)
    try:
        detection = json.loads((out_dir / "detection.json").read_text())
        provenance = Provenance.model_validate_json((out_dir / "provenance.json").read_text())
    except (OSError, ValueError) as exc:
        raise PipelineError("report", exc) from exc

    resolved = provenance.resolved_config
    n_samples = provenance.n_samples
    reference = reference_ordinal if reference_ordinal is not None else detection.get("reference_ordinal")
    if reference is None:
        experiment = IMS_EXPERIMENTS.get(str(resolved.get("bearing", "")).upper())
        if experiment and experiment["n_samples"] == n_samples:
            reference = experiment["monitored"]

    start = detection["degradation_start"]
    accuracy = None
    if start is not None and reference is not None:
        accuracy = prediction_accuracy(start, reference, n_samples)

    return {
        "logged_at": datetime.now().isoformat(timespec="seconds"),
        "out_dir": str(out_dir),
        "series_id": detection["series_id"],
        "framework": resolved.get("framework"),
        "seed": provenance.seed,
        "n_samples": n_samples,
        "degradation_start": start,
        "reference_ordinal": reference,
        "distance": abs(start - reference) if start is not None and reference is not None else None,
        "accuracy": accuracy,
        "config_hash": provenance.config_hash,
    }


def append_results_log(row: Dict[str, Any], path: Union[str, Path] = Config.RESULTS_LOG) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([row]).to_csv(path, mode="a", header=not path.exists(), index=False)
    logger.info("Appended %s to %s", row["series_id"], path)
    return path
