"""Monte-Carlo check that a linear model's MSE equals its Mahalanobis loss plus the noise floor."""
import logging
from dataclasses import dataclass
from typing import Any, Dict, NamedTuple, Optional

import numpy as np

from game.errors import InputError
from game.models import GameSpec

logger = logging.getLogger(__name__)

MIN_SAMPLES = 1000


@dataclass(frozen=True, eq=False)
class LinearSourceSpec:
    """y | x ~ N(beta^T x, noise_sd^2) with x ~ N(0, sigma_x)"""
    beta: np.ndarray
    sigma_x: np.ndarray
    noise_sd: float = 0.0

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        sigma_x = np.array(self.sigma_x, dtype=float)
        if beta.ndim != 1 or sigma_x.shape != (beta.size, beta.size):
            raise InputError(f"sigma_x must be {beta.size}x{beta.size}, got {sigma_x.shape}", field='sigma_x')
        if not np.allclose(sigma_x, sigma_x.T, atol=1e-9, rtol=0.0):
            raise InputError("sigma_x is not symmetric", field='sigma_x')
        if np.linalg.eigvalsh(sigma_x).min() <= 0:
            raise InputError("sigma_x is not positive definite", field='sigma_x')
        if not float(self.noise_sd) >= 0:
            raise InputError(f"noise_sd must be nonnegative, got {self.noise_sd}", field='noise_sd')
        beta.setflags(write=False)
        sigma_x.setflags(write=False)
        object.__setattr__(self, 'beta', beta)
        object.__setattr__(self, 'sigma_x', sigma_x)
        object.__setattr__(self, 'noise_sd', float(self.noise_sd))

    def predicted_mse(self, beta_hat) -> float:
        """(beta_hat - beta)^T sigma_x (beta_hat - beta) + noise_sd^2"""
        diff = self.as_beta(beta_hat) - self.beta
        return float(diff @ self.sigma_x @ diff + self.noise_sd ** 2)

    def as_beta(self, beta_hat) -> np.ndarray:
        beta_hat = np.asarray(beta_hat, dtype=float)
        if beta_hat.shape != self.beta.shape:
            raise InputError(f"beta_hat has shape {beta_hat.shape}, expected {self.beta.shape}", field='beta_hat')
        return beta_hat


class MonteCarloCheck(NamedTuple):
    empirical_mse: float
    predicted: float
    std_err: float

    def within(self, num_se: float = 3.0) -> bool:
        return abs(self.empirical_mse - self.predicted) <= num_se * self.std_err

    def to_dict(self) -> Dict[str, Any]:
        return {'empirical_mse': self.empirical_mse, 'predicted': self.predicted, 'std_err': self.std_err,
                'within_3se': self.within()}


def linear_source_from_game(game: GameSpec, k: int, noise_sd: float = 0.0) -> LinearSourceSpec:
    """Read source k of a game as a linear-regression population: beta = theta_k, sigma_x = Sigma_k"""
    if not 0 <= k < game.num_sources:
        raise InputError(f"source {k} out of range for {game.num_sources} sources", field='source')
    source = game.sources[k]
    return LinearSourceSpec(beta=source.theta, sigma_x=source.sigma, noise_sd=noise_sd)


def _draw(source: LinearSourceSpec, samples: int, seed: Optional[int]):
    if int(samples) < MIN_SAMPLES:
        raise InputError(f"need at least {MIN_SAMPLES} samples, got {samples}", field='samples')
    rng = np.random.default_rng(seed)
    x = rng.multivariate_normal(np.zeros(source.beta.size), source.sigma_x, size=int(samples))
    y = x @ source.beta + source.noise_sd * rng.standard_normal(int(samples))
    return x, y


def _squared_errors(x: np.ndarray, y: np.ndarray, beta_hat: np.ndarray) -> np.ndarray:
    return (y - x @ beta_hat) ** 2


def linear_mc_validate(source: LinearSourceSpec, beta_hat, samples: int = 100_000,
                       seed: Optional[int] = 0) -> MonteCarloCheck:
    beta_hat = source.as_beta(beta_hat)
    x, y = _draw(source, samples, seed)
    errors = _squared_errors(x, y, beta_hat)
    check = MonteCarloCheck(empirical_mse=float(errors.mean()),
                            predicted=source.predicted_mse(beta_hat),
                            std_err=float(errors.std(ddof=1) / np.sqrt(errors.size)))
    logger.info(f"MSE {check.empirical_mse:.6g} vs predicted {check.predicted:.6g} (se {check.std_err:.3g})")
    return check


def linear_rank_agreement(source: LinearSourceSpec, beta_a, beta_b, samples: int = 100_000,
                          seed: Optional[int] = 0) -> bool:
    """Whether two estimators rank the same by empirical MSE as by Mahalanobis loss"""
    beta_a, beta_b = source.as_beta(beta_a), source.as_beta(beta_b)
    x, y = _draw(source, samples, seed)
    empirical = _squared_errors(x, y, beta_a).mean() - _squared_errors(x, y, beta_b).mean()
    predicted = source.predicted_mse(beta_a) - source.predicted_mse(beta_b)
    return bool(np.sign(empirical) == np.sign(predicted))
