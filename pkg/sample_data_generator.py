import logging
from datetime import datetime, timedelta
from pathlib import Path
from typing import Union

import numpy as np
from scipy import signal

from config import Config
from exceptions import ConfigError
from ims_ingest import save_catalog, serialize_record, write_catalog_index
from models import RawRecord, SampleCatalog, SampleMeta, SynthConfig

logger = logging.getLogger(__name__)

SYNTH_START = datetime(2003, 10, 22, 12, 6, 24)
SYNTH_CADENCE = timedelta(minutes=10)


def synth_run_to_failure(n_samples: int,
                         sample_len: int,
                         change_point: int,
                         severity_growth: float,
                         seed: int = 0,
                         sampling_rate: float = Config.SAMPLING_RATE,
                         shaft_frequency: float = Config.SHAFT_FREQUENCY,
                         fault_frequency: float = Config.FAULT_FREQUENCY,
                         shaft_amplitude: float = 1.0,
                         noise_std: float = 0.1,
                         noise_cutoff: float = 0.4) -> SampleCatalog:
    """Generate a synthetic run-to-failure catalog for deterministic testing.

    Healthy samples are band-limited Gaussian noise plus the shaft sinusoid.
    From change_point on, a fault harmonic is added whose amplitude grows as
    severity_growth * (t - change_point). The ground truth change point is
    kept on the catalog.
    """
    if not 0 < change_point < n_samples:
        raise ConfigError(f"change_point {change_point} must lie in (0, {n_samples})")
    if sample_len < 8:
        raise ConfigError(f"sample_len must be >= 8, got {sample_len}")
    if severity_growth < 0:
        raise ConfigError(f"severity_growth must be >= 0, got {severity_growth}")

    rng = np.random.default_rng(seed)
    t = np.arange(sample_len) / sampling_rate
    shaft = shaft_amplitude * np.sin(2 * np.pi * shaft_frequency * t)
    fault_wave = np.sin(2 * np.pi * fault_frequency * t)

    # zero-phase low-pass keeps the noise stationary within a record
    sos = signal.butter(4, noise_cutoff, btype="low", output="sos")
    padlen = min(3 * (2 * len(sos) + 1), sample_len - 1)
    noise = signal.sosfiltfilt(sos, rng.standard_normal((n_samples, sample_len)), axis=1, padlen=padlen)
    noise *= noise_std / noise.std()

    amplitudes = severity_growth * np.clip(np.arange(n_samples) - change_point, 0, None)
    data = shaft[None, :] + noise + amplitudes[:, None] * fault_wave[None, :]

    metas = tuple(
        SampleMeta(timestamp=SYNTH_START + n * SYNTH_CADENCE,
                   ordinal=n,
                   source_name=(SYNTH_START + n * SYNTH_CADENCE).strftime("%Y.%m.%d.%H.%M.%S"))
        for n in range(n_samples)
    )

    logger.debug("Synthesized %d samples of length %d, change point %d, growth %g, seed %d",
                 n_samples, sample_len, change_point, severity_growth, seed)
    return SampleCatalog(metas=metas, data=data, bearing_id="SYN", channel=0, change_point=change_point)


def generate_from_config(config: SynthConfig) -> SampleCatalog:
    return synth_run_to_failure(
        n_samples=config.n_samples,
        sample_len=config.sample_len,
        change_point=config.change_point,
        severity_growth=config.severity_growth,
        seed=config.seed,
    )


def save_sample_data(catalog: SampleCatalog, directory: Union[str, Path] = "sample_data") -> Path:
    """Save a generated catalog as .npz plus its JSON index"""
    directory = Path(directory)
    path = save_catalog(catalog, directory / "catalog.npz")
    write_catalog_index(catalog, directory / "catalog_index.json")
    return path


def write_record_files(catalog: SampleCatalog, directory: Union[str, Path]) -> Path:
    """Write each sample as a one-column IMS-format record file"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for meta, vector in catalog.samples:
        (directory / meta.source_name).write_text(serialize_record(RawRecord(values=vector)))
    return directory


if __name__ == "__main__":
    logging.basicConfig(level=Config.LOG_LEVEL)
    print("Generating synthetic run-to-failure catalog...")
    catalog = synth_run_to_failure(n_samples=300, sample_len=20480, change_point=200, severity_growth=0.02)
    save_sample_data(catalog)
    print(f"Generated {catalog.n_samples} samples of length {catalog.sample_len}")

    rms = np.sqrt(np.mean(catalog.data ** 2, axis=1))
    print("\nRMS before / after the change point:")
    print(f"  healthy  : {rms[:catalog.change_point].mean():.4f}")
    print(f"  degrading: {rms[catalog.change_point:].mean():.4f}")
