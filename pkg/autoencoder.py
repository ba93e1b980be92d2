"""
Sparse tied-weight autoencoder with a saturating linear transfer function.

    z     = satlin(W x + b1)          W: D x D_x
    x_hat = satlin(W.T z + b2)

Cost = reconstruction MSE (summed over inputs, averaged over samples)
     + l2_coeff * 0.5 * sum(W**2)
     + sparsity_coeff * sum_i KL(rho || rho_hat_i)
"""

import json
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from exceptions import DimensionError, NonFiniteError
from models import AEConfig, AEParams, CostBreakdown

logger = logging.getLogger(__name__)

PARAMS_FORMAT_VERSION = 1

Gradient = Tuple[np.ndarray, np.ndarray, np.ndarray]


def satlin(z):
    """0 below 0, identity on (0,1), 1 above 1"""
    return np.clip(z, 0.0, 1.0)


def satlin_grad(z) -> np.ndarray:
    # closed saturation: the kinks at 0 and 1 get slope 0
    return ((z > 0.0) & (z < 1.0)).astype(np.float64)


def encode(params: AEParams, x) -> np.ndarray:
    """Features of one sample (1-D) or of every row of a matrix (2-D)"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.input_dim:
        raise DimensionError(f"input has {x.shape[-1]} entries, autoencoder expects {params.input_dim}")
    if x.ndim == 1:
        return satlin(params.W @ x + params.b1)
    return satlin(x @ params.W.T + params.b1)


def decode(params: AEParams, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != params.hidden_dim:
        raise DimensionError(f"code has {z.shape[-1]} entries, autoencoder expects {params.hidden_dim}")
    if z.ndim == 1:
        return satlin(params.W.T @ z + params.b2)
    return satlin(z @ params.W + params.b2)


def encode_batch(params: AEParams, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return encode(params, X)


def reconstruct(params: AEParams, X) -> np.ndarray:
    return decode(params, encode_batch(params, X))


def kl_divergence(rho: float, rho_hat, eps: float = 1e-8):
    """KL(rho || rho_hat) with rho_hat clamped to [eps, 1 - eps], natural log"""
    clamped = np.clip(rho_hat, eps, 1.0 - eps)
    value = rho * np.log(rho / clamped) + (1.0 - rho) * np.log((1.0 - rho) / (1.0 - clamped))
    return np.maximum(value, 0.0)


def _check_dims(W: np.ndarray, X: np.ndarray, config: AEConfig) -> None:
    if W.shape != (config.hidden_dim, config.input_dim):
        raise DimensionError(f"W has shape {W.shape}, config expects {(config.hidden_dim, config.input_dim)}")
    if X.ndim != 2 or X.shape[1] != config.input_dim:
        raise DimensionError(f"data has shape {X.shape}, expected N x {config.input_dim}")
    if X.shape[0] < 1:
        raise DimensionError("cost needs at least one sample")


def _evaluate(W: np.ndarray, b1: np.ndarray, b2: np.ndarray, X: np.ndarray,
              config: AEConfig, with_gradient: bool):
    _check_dims(W, X, config)
    n = X.shape[0]
    rho, eps = config.sparsity_target, config.kl_epsilon

    A1 = X @ W.T + b1
    Z = satlin(A1)
    A2 = Z @ W + b2
    X_hat = satlin(A2)

    residual = X - X_hat
    mse = float(np.sum(residual ** 2) / n)
    l2 = float(0.5 * np.sum(W ** 2))
    rho_hat = Z.mean(axis=0)
    sparsity = float(np.sum(kl_divergence(rho, rho_hat, eps)))
    total = mse + config.l2_coeff * l2 + config.sparsity_coeff * sparsity

    if not np.isfinite(total):
        raise NonFiniteError(f"cost became non-finite (mse={mse}, l2={l2}, sparsity={sparsity})")

    breakdown = CostBreakdown(
        total=total, mse=mse, l2=l2, sparsity=sparsity, rho_hat=rho_hat,
        l2_coeff=config.l2_coeff, sparsity_coeff=config.sparsity_coeff,
    )
    if not with_gradient:
        return breakdown, None

    # decoder path
    dA2 = (-2.0 / n) * residual * satlin_grad(A2)
    dW = Z.T @ dA2
    db2 = dA2.sum(axis=0)

    # sparsity term reaches Z through rho_hat; the clamp is flat outside (eps, 1-eps)
    inside = (rho_hat > eps) & (rho_hat < 1.0 - eps)
    clamped = np.clip(rho_hat, eps, 1.0 - eps)
    dkl = np.where(inside, -rho / clamped + (1.0 - rho) / (1.0 - clamped), 0.0)
    dZ = dA2 @ W.T + (config.sparsity_coeff / n) * dkl

    # encoder path, W is tied
    dA1 = dZ * satlin_grad(A1)
    dW = dW + dA1.T @ X + config.l2_coeff * W
    db1 = dA1.sum(axis=0)

    if not (np.all(np.isfinite(dW)) and np.all(np.isfinite(db1)) and np.all(np.isfinite(db2))):
        raise NonFiniteError("gradient became non-finite")
    return breakdown, (dW, db1, db2)


def cost(params: AEParams, X, config: AEConfig) -> CostBreakdown:
    breakdown, _ = _evaluate(params.W, params.b1, params.b2, np.asarray(X, dtype=np.float64), config, False)
    return breakdown


def gradient(params: AEParams, X, config: AEConfig) -> Gradient:
    _, grads = _evaluate(params.W, params.b1, params.b2, np.asarray(X, dtype=np.float64), config, True)
    return grads


def cost_and_gradient(params: AEParams, X, config: AEConfig) -> Tuple[CostBreakdown, Gradient]:
    return _evaluate(params.W, params.b1, params.b2, np.asarray(X, dtype=np.float64), config, True)


# ---------------------------------------------------------------------------
# Flat parameter vectors (W row-major, b1, b2)
# ---------------------------------------------------------------------------

def flatten_params(params: AEParams) -> np.ndarray:
    return np.concatenate([params.W.ravel(), params.b1, params.b2])


def split_vector(vector: np.ndarray, hidden_dim: int, input_dim: int) -> Gradient:
    n_weights = hidden_dim * input_dim
    expected = n_weights + hidden_dim + input_dim
    if vector.shape != (expected,):
        raise DimensionError(f"parameter vector has shape {vector.shape}, expected ({expected},)")
    W = vector[:n_weights].reshape(hidden_dim, input_dim)
    b1 = vector[n_weights:n_weights + hidden_dim]
    b2 = vector[n_weights + hidden_dim:]
    return W, b1, b2


def unflatten_params(vector: np.ndarray, hidden_dim: int, input_dim: int) -> AEParams:
    W, b1, b2 = split_vector(np.asarray(vector, dtype=np.float64), hidden_dim, input_dim)
    return AEParams(W=W, b1=b1, b2=b2)


class FlatObjective:
    """Cost and gradient of one training set as functions of a flat vector"""

    def __init__(self, X: np.ndarray, config: AEConfig):
        self.X = np.asarray(X, dtype=np.float64)
        self.config = config
        _check_dims(np.zeros((config.hidden_dim, config.input_dim)), self.X, config)

    @property
    def size(self) -> int:
        return self.config.hidden_dim * self.config.input_dim + self.config.hidden_dim + self.config.input_dim

    def cost(self, vector: np.ndarray) -> float:
        W, b1, b2 = split_vector(vector, self.config.hidden_dim, self.config.input_dim)
        breakdown, _ = _evaluate(W, b1, b2, self.X, self.config, False)
        return breakdown.total

    def gradient(self, vector: np.ndarray) -> np.ndarray:
        W, b1, b2 = split_vector(vector, self.config.hidden_dim, self.config.input_dim)
        _, (dW, db1, db2) = _evaluate(W, b1, b2, self.X, self.config, True)
        return np.concatenate([dW.ravel(), db1, db2])


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_params(params: AEParams, path: Union[str, Path], config: Optional[AEConfig] = None) -> Path:
    """Write parameters as a versioned .npz (bit-exact) or, for .json paths, JSON"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    config_json = config.model_dump_json() if config is not None else ""

    if path.suffix == ".json":
        payload = {
            "version": PARAMS_FORMAT_VERSION,
            "hidden_dim": params.hidden_dim,
            "input_dim": params.input_dim,
            "W": params.W.ravel().tolist(),
            "b1": params.b1.tolist(),
            "b2": params.b2.tolist(),
            "config": json.loads(config_json) if config_json else None,
        }
        path.write_text(json.dumps(payload))
    else:
        with open(path, "wb") as handle:
            np.savez(handle, version=np.array(PARAMS_FORMAT_VERSION), W=params.W, b1=params.b1,
                     b2=params.b2, config=np.array(config_json))
    logger.info("Saved autoencoder parameters (%d x %d) to %s", params.hidden_dim, params.input_dim, path)
    return path


def load_params(path: Union[str, Path]) -> Tuple[AEParams, Optional[AEConfig]]:
    path = Path(path)
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        _check_version(payload["version"], path)
        W = np.array(payload["W"], dtype=np.float64).reshape(payload["hidden_dim"], payload["input_dim"])
        params = AEParams(W=W, b1=payload["b1"], b2=payload["b2"])
        config = AEConfig(**payload["config"]) if payload.get("config") else None
        return params, config

    with np.load(path, allow_pickle=False) as archive:
        _check_version(int(archive["version"]), path)
        params = AEParams(W=archive["W"], b1=archive["b1"], b2=archive["b2"])
        config_json = str(archive["config"])
    config = AEConfig.model_validate_json(config_json) if config_json else None
    return params, config


def _check_version(version: int, path: Path) -> None:
    if version != PARAMS_FORMAT_VERSION:
        raise DimensionError(f"{path} has parameter format version {version}, expected {PARAMS_FORMAT_VERSION}")
