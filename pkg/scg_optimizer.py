import logging
from typing import Callable, Tuple

import numpy as np

from autoencoder import FlatObjective, flatten_params, unflatten_params
from exceptions import DimensionError, NonFiniteError
from models import AEConfig, AEParams, StopReason, TrainConfig, TrainReport

logger = logging.getLogger(__name__)


def init_params(config: AEConfig) -> AEParams:
    """Uniform weights on [-r, r] with r = sqrt(6 / (D + D_x)), zero biases"""
    rng = np.random.default_rng(config.seed)
    r = np.sqrt(6.0 / (config.hidden_dim + config.input_dim))
    W = rng.uniform(-r, r, size=(config.hidden_dim, config.input_dim))
    return AEParams(W=W, b1=np.zeros(config.hidden_dim), b2=np.zeros(config.input_dim))


class ScaledConjugateGradient:
    """Full-batch scaled conjugate gradient (Moller 1993).

    No line search: the step length comes from a finite-difference curvature
    estimate along the search direction, regularized by a Levenberg-Marquardt
    style scale lambda that grows on negative curvature or poor steps and
    shrinks on good ones. Directions restart to steepest descent every P
    iterations, rejected ones included, P being the number of parameters.
    """

    def __init__(self, config: TrainConfig):
        self.config = config

    def minimize(self,
                 objective: Callable[[np.ndarray], float],
                 gradient: Callable[[np.ndarray], np.ndarray],
                 w0: np.ndarray) -> Tuple[np.ndarray, TrainReport]:
        cfg = self.config
        evaluations = 0

        def f_of(v):
            nonlocal evaluations
            evaluations += 1
            value = float(objective(v))
            if not np.isfinite(value):
                raise NonFiniteError("objective became non-finite")
            return value

        def g_of(v):
            nonlocal evaluations
            evaluations += 1
            value = np.asarray(gradient(v), dtype=np.float64)
            if not np.all(np.isfinite(value)):
                raise NonFiniteError("gradient became non-finite")
            return value

        w = np.array(w0, dtype=np.float64)
        n_params = w.size
        f = f_of(w)
        g = g_of(w)
        initial_cost = f

        r = -g
        p = r.copy()
        lam, lam_bar = cfg.lambda_init, 0.0
        success = True
        mu = kappa = delta = 0.0
        epochs = 0
        history = []
        stop = StopReason.MAX_EPOCHS
        best_w, best_f, best_g = w.copy(), f, g.copy()

        if np.linalg.norm(g) <= cfg.grad_tol:
            stop = StopReason.GRAD_TOL
            return w, self._report(0, history, best_g, stop, initial_cost, best_f, lam, evaluations)

        for epoch in range(1, cfg.max_epochs + 1):
            epochs = epoch
            try:
                if success:
                    mu = float(p @ r)
                    if mu <= 0.0:
                        # lost conjugacy, fall back to steepest descent
                        p = r.copy()
                        mu = float(p @ r)
                    kappa = float(p @ p)
                    if kappa == 0.0:
                        stop = StopReason.GRAD_TOL
                        break
                    sigma = cfg.sigma_scg / np.sqrt(kappa)
                    s = (g_of(w + sigma * p) - g) / sigma
                    delta = float(p @ s)

                # scale the curvature, make the Hessian estimate positive definite
                delta += (lam - lam_bar) * kappa
                if delta <= 0.0:
                    lam_bar = 2.0 * (lam - delta / kappa)
                    delta = -delta + lam * kappa
                    lam = lam_bar

                alpha = mu / delta
                w_new = w + alpha * p
                f_new = f_of(w_new)
                comparison = 2.0 * delta * (f - f_new) / mu ** 2

                if comparison >= 0.0 and f_new <= f:
                    g_new = g_of(w_new)
                    improvement = f - f_new
                    w, f = w_new, f_new
                    r_new = -g_new
                    lam_bar = 0.0
                    success = True
                    history.append(f)

                    if epoch % n_params == 0:
                        p = r_new.copy()
                    else:
                        beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                        p = r_new + beta * p
                    g, r = g_new, r_new

                    if f <= best_f:
                        best_w, best_f, best_g = w.copy(), f, g.copy()
                    if comparison >= 0.75:
                        lam = 0.25 * lam
                else:
                    lam_bar = lam
                    success = False
                    logger.debug("epoch %d: step rejected (comparison %.3g), lambda %.3g", epoch, comparison, lam)

                if comparison < 0.25:
                    lam = lam + delta * (1.0 - comparison) / kappa
            except NonFiniteError as exc:
                logger.warning("SCG stopped at epoch %d: %s", epoch, exc)
                stop = StopReason.NUMERICAL_FAILURE
                break

            grad_norm = float(np.linalg.norm(g))
            if cfg.log_every and epoch % cfg.log_every == 0:
                logger.info("epoch %d  cost %.8g  |grad| %.3e  lambda %.3e", epoch, f, grad_norm, lam)

            if success:
                if grad_norm <= cfg.grad_tol:
                    stop = StopReason.GRAD_TOL
                    break
                if improvement < cfg.cost_tol:
                    stop = StopReason.COST_TOL
                    break

        report = self._report(epochs, history, best_g, stop, initial_cost, best_f, lam, evaluations)
        logger.info("SCG finished after %d epochs (%s): cost %.6g -> %.6g",
                    epochs, stop.value, initial_cost, best_f)
        return best_w, report

    @staticmethod
    def _report(epochs, history, g, stop, initial_cost, final_cost, lam, evaluations) -> TrainReport:
        return TrainReport(
            epochs_run=epochs,
            cost_history=history,
            final_grad_norm=float(np.linalg.norm(g)),
            stop_reason=stop,
            initial_cost=initial_cost,
            final_cost=final_cost,
            lambda_final=lam,
            evaluations=evaluations,
        )


def train(params0: AEParams,
          X: np.ndarray,
          ae_config: AEConfig,
          train_config: TrainConfig) -> Tuple[AEParams, TrainReport]:
    """Fit the autoencoder to the rows of X with full-batch SCG"""
    if params0.W.shape != (ae_config.hidden_dim, ae_config.input_dim):
        raise DimensionError(
            f"initial parameters {params0.W.shape} do not match config "
            f"{(ae_config.hidden_dim, ae_config.input_dim)}"
        )
    objective = FlatObjective(X, ae_config)
    logger.info("Training %d-%d autoencoder on %d samples (%d parameters)",
                ae_config.input_dim, ae_config.hidden_dim, objective.X.shape[0], objective.size)

    optimizer = ScaledConjugateGradient(train_config)
    best, report = optimizer.minimize(objective.cost, objective.gradient, flatten_params(params0))
    return unflatten_params(best, ae_config.hidden_dim, ae_config.input_dim), report
