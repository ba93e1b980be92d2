#!/usr/bin/env python3
"""
AEC bearing health monitoring - command line.

    python cli.py synth    --out data/synthetic
    python cli.py ingest   --dataset /data/IMS/2nd_test --bearing S2B1 --out data/s2b1
    python cli.py monitor  --catalog data/s2b1/catalog.npz --preset desk --out results/s2b1
    python cli.py online   --synthetic --preset desk --out results/synthetic
    python cli.py report   --out results/s2b1
    python cli.py baseline --catalog data/s2b1/catalog.npz --out results/s2b1-baseline

Exit codes: 0 run finished with a detection, 2 finished without one, 1 error.
"""

import argparse
import copy
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from autoencoder import save_params
from config import Config, DESK_PRESET, PUBLISHED_PRESET
from degradation_detector import baseline_report, flags_rle, kurtosis_series, rms_series
from exceptions import AECError
from ims_ingest import save_catalog, write_catalog_index
from models import DetectionReport, Framework, RunConfig, RunResult, SynthConfig
from pipeline import (AECPipeline, append_results_log, emit_outputs, load_run_catalog, run, run_monitor,
                      run_online, stage, summarize_output)
from sample_data_generator import generate_from_config, save_sample_data, write_record_files

logger = logging.getLogger(__name__)

EXIT_OK = EXIT_DETECTED = 0
EXIT_ERROR = 1
EXIT_NOT_DETECTED = 2

PRESETS = {"desk": DESK_PRESET, "published": PUBLISHED_PRESET}

# flag dest -> path inside RunConfig
OVERRIDES = [
    ("dataset", ("dataset_root",)),
    ("catalog", ("catalog_path",)),
    ("bearing", ("bearing",)),
    ("sensor", ("sensor",)),
    ("channel", ("channel",)),
    ("framework", ("framework",)),
    ("train_fraction", ("train_fraction",)),
    ("scaling", ("scaling",)),
    ("decimate", ("decimation",)),
    ("workers", ("parse_workers",)),
    ("expected_rows", ("expected_rows",)),
    ("hidden", ("autoencoder", "hidden_dim")),
    ("epochs", ("training", "max_epochs")),
    ("log_every", ("training", "log_every")),
    ("wsize", ("aec", "w_size")),
    ("min_span", ("aec", "min_span")),
    ("theta", ("detector", "theta")),
    ("lag", ("detector", "lag")),
    ("warmup", ("detector", "warmup")),
    ("seed", ("seed",)),
    ("out", ("output_dir",)),
    ("reference_ordinal", ("reference_ordinal",)),
]

SYNTH_OVERRIDES = [
    ("n_samples", "n_samples"),
    ("sample_len", "sample_len"),
    ("change_point", "change_point"),
    ("severity", "severity_growth"),
]


def deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _set_path(data: Dict[str, Any], path: Sequence[str], value: Any) -> None:
    for key in path[:-1]:
        data = data.setdefault(key, {})
    data[path[-1]] = value


def build_run_config(args: argparse.Namespace, framework: Optional[Framework] = None) -> RunConfig:
    """Defaults, then preset, then --config file, then individual flags"""
    data: Dict[str, Any] = {}
    if getattr(args, "preset", None):
        data = deep_merge(data, PRESETS[args.preset])
    if getattr(args, "config", None):
        from_file = RunConfig.model_validate_json(Path(args.config).read_text())
        data = deep_merge(data, from_file.model_dump(mode="json", exclude_unset=True))

    for dest, path in OVERRIDES:
        value = getattr(args, dest, None)
        if value is not None:
            _set_path(data, path, value)

    synth = {field: getattr(args, dest) for dest, field in SYNTH_OVERRIDES if getattr(args, dest, None) is not None}
    if getattr(args, "synthetic", False) or synth:
        data["synthetic"] = deep_merge(data.get("synthetic") or {}, synth)

    if framework is not None:
        data["framework"] = framework.value
    return RunConfig.model_validate(data)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _print_result(result: RunResult, out_dir: Path) -> int:
    detection = result.detection
    report = result.train_report
    print(f"🧠 Trained {report.epochs_run} epochs ({report.stop_reason.value}), cost {report.initial_cost:.6g} -> {report.final_cost:.6g}")
    if detection.detected:
        print(f"🚨 {detection.series_id}: degradation starts at sample {detection.degradation_start}")
        if result.accuracy is not None:
            print(f"🎯 Accuracy vs reference {result.reference_ordinal}: {100 * result.accuracy:.2f}%")
    else:
        print(f"✅ {detection.series_id}: no degradation detected")
    print(f"📁 Results written to {out_dir}")
    return EXIT_DETECTED if detection.detected else EXIT_NOT_DETECTED


def cmd_synth(args: argparse.Namespace) -> int:
    config = SynthConfig(
        n_samples=args.n_samples if args.n_samples is not None else 300,
        sample_len=args.sample_len if args.sample_len is not None else Config.RECORD_ROWS,
        change_point=args.change_point if args.change_point is not None else 200,
        severity_growth=args.severity if args.severity is not None else 0.02,
        seed=args.seed if args.seed is not None else 0,
    )
    catalog = generate_from_config(config)
    out = Path(args.out or "sample_data")
    path = save_sample_data(catalog, out)
    print(f"📊 Generated {catalog.n_samples} samples of length {catalog.sample_len} (change point {catalog.change_point})")
    print(f"📁 Catalog written to {path}")
    if args.records:
        write_record_files(catalog, args.records)
        print(f"📁 Record files written to {args.records}")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    with stage("ingest"):
        catalog = load_run_catalog(config)
        out = Path(args.out or Config.OUTPUT_DIR)
        path = save_catalog(catalog, out / "catalog.npz")
        write_catalog_index(catalog, out / "catalog_index.json")
    print(f"📊 Cataloged {catalog.n_samples} samples of {catalog.bearing_id} channel {catalog.channel} "
          f"({catalog.sample_len} points each)")
    print(f"📁 Catalog written to {path}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    pipeline = AECPipeline(build_run_config(args))
    with stage("ingest"):
        catalog = load_run_catalog(pipeline.config)
        n_train = pipeline.split(catalog)
    _, ae_config, params, report = pipeline.fit(catalog, n_train)

    out = Path(pipeline.config.output_dir)
    with stage("emit"):
        save_params(params, out / "params.npz", ae_config)
        (out / "train_report.json").write_text(report.model_dump_json(indent=2) + "\n")
    print(f"🧠 Trained {ae_config.input_dim}-{ae_config.hidden_dim} autoencoder on {n_train} samples: "
          f"{report.epochs_run} epochs ({report.stop_reason.value}), cost {report.final_cost:.6g}")
    print(f"📁 Parameters written to {out / 'params.npz'}")
    return EXIT_OK


def cmd_monitor(args: argparse.Namespace) -> int:
    config = build_run_config(args, Framework.MONITOR)
    result = run_monitor(config)
    emit_outputs(result, config.output_dir)
    return _print_result(result, config.output_dir)


def cmd_online(args: argparse.Namespace) -> int:
    config = build_run_config(args, Framework.ONLINE)
    result = run_online(config)
    emit_outputs(result, config.output_dir)
    return _print_result(result, config.output_dir)


def cmd_run(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    result = run(config)
    emit_outputs(result, config.output_dir)
    return _print_result(result, config.output_dir)


def cmd_report(args: argparse.Namespace) -> int:
    row = summarize_output(args.out, args.reference_ordinal)
    log_path = append_results_log(row, args.log or Config.RESULTS_LOG)
    if row["degradation_start"] is None:
        print(f"✅ {row['series_id']}: no degradation detected")
    else:
        print(f"🚨 {row['series_id']}: degradation starts at sample {row['degradation_start']}")
    if row["accuracy"] is not None:
        print(f"🎯 Reference {row['reference_ordinal']}, distance {row['distance']}, accuracy {100 * row['accuracy']:.2f}%")
    print(f"📝 Logged to {log_path}")
    return EXIT_NOT_DETECTED if row["degradation_start"] is None else EXIT_DETECTED


def _baseline_payload(report: DetectionReport) -> Dict[str, Any]:
    return {
        "series_id": report.series_id,
        "degradation_start": report.degradation_start,
        "detected": report.detected,
        "inverted": report.inverted,
        **report.config_echo.model_dump(),
        "flags_rle": flags_rle(report.flags),
    }


def cmd_baseline(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    with stage("ingest"):
        catalog = load_run_catalog(config)
    with stage("detect"):
        indicators = {"rms": rms_series(catalog), "kurtosis": kurtosis_series(catalog)}
        outcomes = {
            name: baseline_report(values, config.detector, config.aec.w_size, f"{catalog.bearing_id}-{name}")
            for name, values in indicators.items()
        }

    out = Path(config.output_dir)
    with stage("emit"):
        out.mkdir(parents=True, exist_ok=True)
        for name, (series, report) in outcomes.items():
            pd.DataFrame({
                "ordinal": range(series.n_samples),
                "value": series.raw_corr,
                "normalized": series.normalized,
                "filtered": series.filtered,
            }).to_csv(out / f"{name}_series.csv", index=False)
            (out / f"{name}_detection.json").write_text(json.dumps(_baseline_payload(report), indent=2) + "\n")

    for name, (_, report) in outcomes.items():
        start = report.degradation_start
        print(f"📈 {name}: " + ("no degradation detected" if start is None else f"degradation starts at sample {start}"))
    print(f"📁 Results written to {out}")
    return EXIT_DETECTED if any(report.detected for _, report in outcomes.values()) else EXIT_NOT_DETECTED


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _source_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("catalog source")
    group.add_argument("--config", type=Path, help="JSON run configuration")
    group.add_argument("--preset", choices=sorted(PRESETS), help="desk (fast, decimated) or published-scale settings")
    group.add_argument("--dataset", type=Path, help=f"IMS test directory (default: $AEC_DATASET_ROOT = {Config.DATASET_ROOT})")
    group.add_argument("--catalog", type=Path, help="saved catalog .npz")
    group.add_argument("--synthetic", action="store_true", help="use a synthetic run-to-failure catalog")
    group.add_argument("--n-samples", type=int, help="synthetic catalog length")
    group.add_argument("--sample-len", type=int, help="synthetic sample length")
    group.add_argument("--change-point", type=int, help="synthetic fault onset")
    group.add_argument("--severity", type=float, help="synthetic fault growth per sample")
    group.add_argument("--bearing", help="bearing id, e.g. S2B1")
    group.add_argument("--sensor", type=int, choices=(1, 2), help="sensor of the bearing (test 1 has two)")
    group.add_argument("--channel", type=int, help="explicit zero-based record column")
    group.add_argument("--decimate", type=int, help="keep every k-th time point")
    group.add_argument("--workers", type=int, help="parallel record parsers")
    group.add_argument("--expected-rows", type=int, help=f"rows per record file (default {Config.RECORD_ROWS})")
    group.add_argument("--seed", type=int, help="run seed")
    group.add_argument("--out", type=Path, help="output directory")


def _model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    group.add_argument("--framework", choices=[f.value for f in Framework])
    group.add_argument("--train-fraction", type=float, help="online framework training share (default 0.7)")
    group.add_argument("--scaling", choices=["global-minmax", "per-sample-minmax", "none"])
    group.add_argument("--hidden", type=int, help="hidden units D")
    group.add_argument("--epochs", type=int, help="maximum SCG epochs")
    group.add_argument("--log-every", type=int, help="SCG progress line every N epochs")
    group.add_argument("--wsize", type=int, help="moving-average window")
    group.add_argument("--min-span", type=float, help="normalization span floor")
    group.add_argument("--theta", type=float, help="detection ratio threshold")
    group.add_argument("--lag", type=int, help="detection comparison lag")
    group.add_argument("--warmup", type=int, help="samples never flagged")
    group.add_argument("--reference-ordinal", type=int, help="reference degradation start for accuracy")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="AEC bearing health monitoring")
    parser.add_argument("--log-level", default=None, help=f"logging level (default {Config.LOG_LEVEL})")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic run-to-failure catalog")
    synth.add_argument("--n-samples", type=int)
    synth.add_argument("--sample-len", type=int)
    synth.add_argument("--change-point", type=int)
    synth.add_argument("--severity", type=float)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--out", type=Path)
    synth.add_argument("--records", type=Path, help="also write IMS-format record files here")
    synth.set_defaults(handler=cmd_synth)

    ingest = sub.add_parser("ingest", help="parse IMS record files into a catalog")
    _source_flags(ingest)
    ingest.set_defaults(handler=cmd_ingest)

    for name, handler, help_text in (
        ("train", cmd_train, "train the autoencoder and save its parameters"),
        ("monitor", cmd_monitor, "monitoring framework: train on all samples"),
        ("online", cmd_online, "online framework: train on the leading fraction"),
        ("run", cmd_run, "run the framework named by --framework or the config"),
        ("baseline", cmd_baseline, "RMS and kurtosis baselines with the inverted detector"),
    ):
        command = sub.add_parser(name, help=help_text)
        _source_flags(command)
        _model_flags(command)
        command.set_defaults(handler=handler)

    report = sub.add_parser("report", help="summarize a run directory and append it to the results log")
    report.add_argument("--out", type=Path, required=True, help="run output directory")
    report.add_argument("--reference-ordinal", type=int)
    report.add_argument("--log", type=Path, help=f"results log CSV (default {Config.RESULTS_LOG})")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = "DEBUG" if args.verbose else (args.log_level or Config.LOG_LEVEL)
    logging.basicConfig(level=level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        return args.handler(args)
    except (AECError, ValidationError, OSError, ValueError) as exc:
        logger.debug("command failed", exc_info=True)
        print(f"❌ {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
