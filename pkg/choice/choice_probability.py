import numpy as np
from scipy.special import logsumexp, softmax

from choice.base_choice import BaseChoiceModel
from config import config
from game.errors import InputError


def choose_prob(losses, t: float) -> np.ndarray:
    """Logit shares exp(-l/t) / sum exp(-l/t)."""
    return ProbabilityChoice(t).choose(losses)


class ProbabilityChoice(BaseChoiceModel):
    """Sources pick providers noisily through a logit over negative losses"""

    def __init__(self, temperature: float, tie_tol=None):
        try:
            temperature = float(temperature)
        except (TypeError, ValueError):
            raise InputError(f"temperature must be a number, got {temperature!r}", field='t')
        floor = float(config.get('tolerances.min_temperature', 1e-12))
        if not temperature >= floor:
            raise InputError(f"temperature must be at least {floor}, got {temperature}", field='t')
        super().__init__('probability', temperature, tie_tol)

    def share_matrix(self, losses: np.ndarray) -> np.ndarray:
        # softmax subtracts the column max before exponentiating
        return softmax(-np.asarray(losses, dtype=float) / self.temperature, axis=0)

    def deviation_shares(self, deviation_losses: np.ndarray, other_losses: np.ndarray) -> np.ndarray:
        deviation_losses = np.atleast_2d(deviation_losses)
        if other_losses.shape[0] == 0:
            return np.ones_like(deviation_losses)

        own = -deviation_losses / self.temperature
        rest = logsumexp(-other_losses / self.temperature, axis=0)
        return np.exp(own - np.logaddexp(own, rest))

    def logit_terms(self, losses: np.ndarray):
        """Shares p and complements 1 - p over an N x K loss matrix without cancellation."""
        scaled = -np.asarray(losses, dtype=float) / self.temperature
        total = logsumexp(scaled, axis=0)
        shares = np.exp(scaled - total)
        n = scaled.shape[0]
        if n == 1:
            return shares, np.zeros_like(shares)
        complements = np.empty_like(shares)
        for i in range(n):
            others = np.delete(scaled, i, axis=0)
            complements[i] = np.exp(logsumexp(others, axis=0) - total)
        return shares, complements
