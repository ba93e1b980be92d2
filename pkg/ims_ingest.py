"""
Ingest IMS-format run-to-failure vibration records.

Each dataset file is one 1-second recording: whitespace separated columns
(one per accelerometer channel), one time point per line, with the file
name encoding the acquisition time as YYYY.MM.DD.hh.mm.ss.
"""

import io
import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.preprocessing import MinMaxScaler, minmax_scale

from config import Config
from exceptions import CatalogError, RecordParseError, ScalingError
from models import RawRecord, SampleCatalog, SampleMeta, ScalingInfo, ScalingMode

logger = logging.getLogger(__name__)

_BEARING_PATTERN = re.compile(r"^(?:S\d+)?B?(\d+)$", re.IGNORECASE)


# ---------------------------------------------------------------------------
# Record files
# ---------------------------------------------------------------------------

def parse_record_file(text: str, expected_rows: int, source: Optional[str] = None) -> RawRecord:
    """Parse one ASCII record into a RawRecord of expected_rows x channels"""
    try:
        frame = pd.read_csv(io.StringIO(text), sep=r"\s+", header=None, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise RecordParseError(f"row count 0 != expected {expected_rows}", source=source)
    except pd.errors.ParserError as exc:
        raise _locate_problem(text, source) from exc

    numeric = all(pd.api.types.is_numeric_dtype(dtype) and not pd.api.types.is_bool_dtype(dtype)
                  for dtype in frame.dtypes)
    if not numeric:
        raise _locate_problem(text, source)
    values = frame.to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise _locate_problem(text, source)

    if values.shape[0] != expected_rows:
        raise RecordParseError(f"row count {values.shape[0]} != expected {expected_rows}", source=source)

    return RawRecord(values=values)


def _locate_problem(text: str, source: Optional[str]) -> RecordParseError:
    """Line-by-line scan that names the first offending line"""
    width = None
    for number, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            return RecordParseError(f"expected {width} columns, found {len(tokens)}", line=number, source=source)
        for token in tokens:
            try:
                value = float(token)
            except ValueError:
                return RecordParseError(f"non-numeric token {token!r}", line=number, source=source)
            if not math.isfinite(value):
                return RecordParseError(f"non-finite value {token!r}", line=number, source=source)
    return RecordParseError("malformed record", source=source)


def serialize_record(record: RawRecord) -> str:
    """Tab separated text that parse_record_file reads back"""
    return pd.DataFrame(record.values).to_csv(sep="\t", header=False, index=False, lineterminator="\n")


def load_record_file(path: Union[str, Path], expected_rows: int = Config.RECORD_ROWS) -> RawRecord:
    path = Path(path)
    return parse_record_file(path.read_text(), expected_rows, source=path.name)


def load_dataset_dir(root: Union[str, Path],
                     expected_rows: int = Config.RECORD_ROWS,
                     workers: int = Config.PARSE_WORKERS) -> List[Tuple[str, RawRecord]]:
    """Parse every record file of one test directory, returned in name order"""
    root = Path(root)
    if not root.is_dir():
        raise CatalogError(f"dataset directory {root} does not exist")

    paths = sorted(p for p in root.iterdir() if p.is_file() and not p.name.startswith("."))
    if not paths:
        raise CatalogError(f"no record files in {root}")

    logger.info("Parsing %d record files from %s with %d workers", len(paths), root, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(lambda p: load_record_file(p, expected_rows), paths))

    return [(path.name, record) for path, record in zip(paths, records)]


# ---------------------------------------------------------------------------
# Catalogs
# ---------------------------------------------------------------------------

def parse_timestamp(name: str, timestamp_format: str = Config.TIMESTAMP_FORMAT) -> datetime:
    try:
        return datetime.strptime(Path(name).name, timestamp_format)
    except ValueError:
        raise CatalogError(f"file name {name!r} does not match timestamp format {timestamp_format!r}")


def bearing_channel(bearing_id: str, channel_count: int, sensor: int = 1) -> int:
    """Zero-based column of a bearing's accelerometer.

    Test 1 records carry two sensors per bearing (8 columns), tests 2 and 3
    one sensor per bearing (4 columns).
    """
    match = _BEARING_PATTERN.match(bearing_id.strip())
    if not match:
        raise CatalogError(f"cannot read a bearing number from {bearing_id!r}")
    bearing = int(match.group(1))
    if not 1 <= bearing <= 4:
        raise CatalogError(f"bearing {bearing} outside 1..4")

    if channel_count == 8:
        if sensor not in (1, 2):
            raise CatalogError(f"sensor {sensor} outside 1..2")
        return 2 * bearing - 2 + (sensor - 1)
    if channel_count == 4:
        if sensor != 1:
            raise CatalogError("4-channel records carry one sensor per bearing")
        return bearing - 1
    raise CatalogError(f"no channel mapping for {channel_count}-channel records, pass a channel explicitly")


def build_catalog(files: Sequence[Tuple[str, RawRecord]],
                  bearing_id: str,
                  channel: int,
                  timestamp_format: str = Config.TIMESTAMP_FORMAT) -> SampleCatalog:
    """Assemble the time-ordered catalog of one channel"""
    if not files:
        raise CatalogError("no records to catalog")

    stamped = []
    seen = {}
    for name, record in files:
        timestamp = parse_timestamp(name, timestamp_format)
        if not 0 <= channel < record.channel_count:
            raise CatalogError(
                f"channel {channel} out of range for {name} with {record.channel_count} channels"
            )
        if timestamp in seen:
            raise CatalogError(f"duplicate timestamp {timestamp:%Y-%m-%d %H:%M:%S} in {seen[timestamp]} and {name}")
        seen[timestamp] = name
        stamped.append((timestamp, name, record))

    stamped.sort(key=lambda item: item[0])

    lengths = {record.row_count for _, _, record in stamped}
    if len(lengths) != 1:
        raise CatalogError(f"records have differing lengths {sorted(lengths)}")

    metas = tuple(
        SampleMeta(timestamp=timestamp, ordinal=ordinal, source_name=name)
        for ordinal, (timestamp, name, _) in enumerate(stamped)
    )
    data = np.stack([record.values[:, channel] for _, _, record in stamped])

    logger.info("Cataloged %d samples of %s channel %d", len(metas), bearing_id, channel)
    return SampleCatalog(metas=metas, data=data, bearing_id=bearing_id, channel=channel)


def decimate_catalog(catalog: SampleCatalog, factor: int) -> SampleCatalog:
    """Keep every factor-th time point of each sample"""
    if factor < 1:
        raise CatalogError(f"decimation factor must be >= 1, got {factor}")
    if factor == 1:
        return catalog
    return catalog.replace(data=catalog.data[:, ::factor])


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------

def scale_catalog(catalog: SampleCatalog,
                  mode: ScalingMode = ScalingMode.GLOBAL_MINMAX,
                  fit_count: Optional[int] = None) -> SampleCatalog:
    """Map catalog entries into [0,1] for the autoencoder.

    Global bounds are fitted on the first fit_count samples (all by default);
    entries of later samples falling outside those bounds clip to [0,1].
    """
    mode = ScalingMode(mode)
    if catalog.n_samples == 0:
        raise ScalingError("cannot scale an empty catalog")

    if mode == ScalingMode.NONE:
        return catalog.replace(scaling=ScalingInfo(mode=mode))

    if mode == ScalingMode.PER_SAMPLE_MINMAX:
        spans = np.ptp(catalog.data, axis=1)
        if np.any(spans == 0):
            ordinal = int(np.flatnonzero(spans == 0)[0])
            raise ScalingError(f"sample {ordinal} is constant, per-sample scaling undefined")
        scaled = minmax_scale(catalog.data, axis=1)
        info = ScalingInfo(mode=mode, min=float(catalog.data.min()), max=float(catalog.data.max()))
        return catalog.replace(data=scaled, scaling=info)

    fit_count = catalog.n_samples if fit_count is None else fit_count
    if not 1 <= fit_count <= catalog.n_samples:
        raise ScalingError(f"fit_count {fit_count} outside 1..{catalog.n_samples}")

    fitted = catalog.data[:fit_count]
    low, high = float(fitted.min()), float(fitted.max())
    if not high > low:
        raise ScalingError(f"constant dataset (min = max = {low}), global scaling undefined")

    scaler = MinMaxScaler(clip=True).fit(fitted.reshape(-1, 1))
    scaled = scaler.transform(catalog.data.reshape(-1, 1)).reshape(catalog.data.shape)
    info = ScalingInfo(mode=mode, min=low, max=high, fit_count=fit_count)
    logger.debug("Scaled %s to [0,1] from [%g, %g] over %d samples", catalog.bearing_id, low, high, fit_count)
    return catalog.replace(data=scaled, scaling=info)


def inverse_scale(catalog: SampleCatalog) -> np.ndarray:
    """Recover raw amplitudes (exact for entries that were not clipped)"""
    info = catalog.scaling
    if info.mode == ScalingMode.NONE:
        return np.array(catalog.data)
    if info.mode == ScalingMode.PER_SAMPLE_MINMAX:
        raise ScalingError("per-sample scaling keeps no per-sample bounds, cannot invert")
    return catalog.data * (info.max - info.min) + info.min


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _catalog_header(catalog: SampleCatalog) -> dict:
    return {
        "bearing_id": catalog.bearing_id,
        "channel": catalog.channel,
        "N": catalog.n_samples,
        "sample_len": catalog.sample_len,
        "scaling": catalog.scaling.model_dump(mode="json"),
        "change_point": catalog.change_point,
    }


def write_catalog_index(catalog: SampleCatalog, path: Union[str, Path]) -> Path:
    """JSON index: bearing, channel, N, scaling and ordered source names"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    index = _catalog_header(catalog)
    index["source_names"] = catalog.source_names
    path.write_text(json.dumps(index, indent=2))
    return path


def save_catalog(catalog: SampleCatalog, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as handle:
        np.savez(
            handle,
            data=catalog.data,
            timestamps=np.array([meta.timestamp.isoformat() for meta in catalog.metas]),
            names=np.array(catalog.source_names),
            header=np.array(json.dumps(_catalog_header(catalog))),
        )
    logger.info("Saved catalog of %d samples to %s", catalog.n_samples, path)
    return path


def load_catalog(path: Union[str, Path]) -> SampleCatalog:
    path = Path(path)
    if not path.is_file():
        raise CatalogError(f"catalog file {path} does not exist")
    with np.load(path, allow_pickle=False) as archive:
        header = json.loads(str(archive["header"]))
        metas = tuple(
            SampleMeta(timestamp=datetime.fromisoformat(str(stamp)), ordinal=ordinal, source_name=str(name))
            for ordinal, (stamp, name) in enumerate(zip(archive["timestamps"], archive["names"]))
        )
        data = np.array(archive["data"])
    return SampleCatalog(
        metas=metas,
        data=data,
        bearing_id=header["bearing_id"],
        channel=header["channel"],
        scaling=ScalingInfo(**header["scaling"]),
        change_point=header.get("change_point"),
    )
