from typing import Dict, Any, Optional

import numpy as np

from config import config
from game.errors import InputError
from interfaces.i_choice_model import IChoiceModel


class BaseChoiceModel(IChoiceModel):
    """Base class with common choice-model functionality"""

    def __init__(self, kind: str, temperature: Optional[float] = None, tie_tol: Optional[float] = None):
        self.kind = kind
        self.temperature = temperature
        self.tie_tol = float(tie_tol if tie_tol is not None else config.get('tolerances.tie_tol', 1e-9))
        if self.tie_tol < 0:
            raise InputError(f"tie_tol must be nonnegative, got {self.tie_tol}", field='tie_tol')

    def choose(self, losses: np.ndarray) -> np.ndarray:
        column = self._as_column(losses)
        return self.share_matrix(column[:, None])[:, 0]

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'temperature': self.temperature}

    def __repr__(self) -> str:
        if self.temperature is None:
            return f"{type(self).__name__}()"
        return f"{type(self).__name__}(t={self.temperature})"

    @staticmethod
    def _as_column(losses) -> np.ndarray:
        column = np.asarray(losses, dtype=float)
        if column.ndim != 1 or column.size == 0:
            raise InputError("losses must be a non-empty vector", field='losses')
        if not np.all(np.isfinite(column)):
            raise InputError("losses must be finite", field='losses')
        return column
