import numpy as np

from choice.base_choice import BaseChoiceModel


def choose_prox(losses, tie_tol: float = 1e-9) -> np.ndarray:
    """Lowest loss wins; providers within tie_tol of the minimum split the source evenly."""
    return ProximityChoice(tie_tol=tie_tol).choose(losses)


class ProximityChoice(BaseChoiceModel):
    """Each source deterministically picks its lowest-loss provider"""

    def __init__(self, tie_tol=None):
        super().__init__('proximity', None, tie_tol)

    def share_matrix(self, losses: np.ndarray) -> np.ndarray:
        losses = np.asarray(losses, dtype=float)
        winners = losses <= losses.min(axis=0) + self.tie_tol
        return winners / winners.sum(axis=0)

    def deviation_shares(self, deviation_losses: np.ndarray, other_losses: np.ndarray) -> np.ndarray:
        deviation_losses = np.atleast_2d(deviation_losses)
        if other_losses.shape[0] == 0:
            return np.ones_like(deviation_losses)

        best = np.minimum(deviation_losses, other_losses.min(axis=0))
        wins = deviation_losses <= best + self.tie_tol
        # G x M x K: which incumbents stay in the tie at each candidate
        tied = other_losses[None, :, :] <= best[:, None, :] + self.tie_tol
        return np.where(wins, 1.0 / (1.0 + tied.sum(axis=1)), 0.0)
