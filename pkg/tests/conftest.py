from datetime import datetime, timedelta
from typing import List, Tuple

import numpy as np
import pytest

from models import AEConfig, RawRecord, RunConfig

IMS_START = datetime(2004, 2, 12, 10, 32, 39)


def ims_name(index: int) -> str:
    return (IMS_START + index * timedelta(minutes=10)).strftime("%Y.%m.%d.%H.%M.%S")


def record_text(values: np.ndarray) -> str:
    return "\n".join("\t".join(repr(float(v)) for v in row) for row in np.atleast_2d(values)) + "\n"


def make_files(n: int, rows: int = 6, channels: int = 4, seed: int = 0) -> List[Tuple[str, RawRecord]]:
    rng = np.random.default_rng(seed)
    return [(ims_name(i), RawRecord(values=rng.normal(size=(rows, channels)))) for i in range(n)]


def degrading_features(n: int = 60, dim: int = 32, onset: int = 40, seed: int = 0) -> np.ndarray:
    """Feature rows near a common healthy pattern, drifting away after onset"""
    rng = np.random.default_rng(seed)
    healthy = rng.uniform(size=dim)
    drift = rng.uniform(size=dim)
    weights = np.clip((np.arange(n) - onset) / (n - onset), 0, None)[:, None]
    return (1 - weights) * healthy + weights * drift + 0.01 * rng.standard_normal((n, dim))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_config():
    return AEConfig(input_dim=8, hidden_dim=4, l2_coeff=0.01, sparsity_coeff=0.5, sparsity_target=0.1)


@pytest.fixture
def tiny_run_config(tmp_path):
    """Seconds-scale synthetic run"""
    def build(**changes) -> RunConfig:
        data = {
            "synthetic": {"n_samples": 40, "sample_len": 64, "change_point": 25, "severity_growth": 0.3},
            "autoencoder": {"hidden_dim": 8},
            "training": {"max_epochs": 15},
            "aec": {"w_size": 3},
            "detector": {"lag": 5},
            "output_dir": str(tmp_path / "results"),
        }
        for key, value in changes.items():
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return RunConfig.model_validate(data)
    return build
