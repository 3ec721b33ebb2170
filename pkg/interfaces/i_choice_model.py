from abc import ABC, abstractmethod
from typing import Dict, Any, Optional

import numpy as np


class IChoiceModel(ABC):
    kind: str
    temperature: Optional[float]

    @abstractmethod
    def choose(self, losses: np.ndarray) -> np.ndarray:
        """
        Split one source among N providers given their losses on it
        Returns: probability vector of length N
        """
        pass

    @abstractmethod
    def share_matrix(self, losses: np.ndarray) -> np.ndarray:
        """Column-wise choose() over an N x K loss matrix"""
        pass

    @abstractmethod
    def deviation_shares(self, deviation_losses: np.ndarray, other_losses: np.ndarray) -> np.ndarray:
        """
        Share a deviating provider wins on each source
        deviation_losses: G x K losses of G candidate deviations
        other_losses: M x K losses of the providers that stay put (M may be 0)
        Returns: G x K shares
        """
        pass

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Serializable description of the model"""
        pass
