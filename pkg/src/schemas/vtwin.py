from dataclasses import dataclass, replace
from typing import Dict, Optional

import numpy as np

from src.schemas.features import ZScoreStats

EMBED_HIDDEN = 32
READOUT_HIDDEN = (32, 16)
ATTENTION_DIM = 16


@dataclass(frozen=True)
class ModelWeights:
    """
    Parâmetros aprendíveis do gêmeo virtual, hiperparâmetros m, n, K, estatísticas
    de normalização e versão. Tratado como imutável: treino e rollback criam cópias.
    """

    params: Dict[str, np.ndarray]
    m: int
    n: int
    K: int
    stats: Optional[ZScoreStats] = None
    occupancy_scale: float = 1.0
    version: int = 0

    def copy(self, **changes) -> "ModelWeights":
        params = {name: value.copy() for name, value in self.params.items()}
        return replace(self, params=params, **changes)

    @property
    def parameter_count(self) -> int:
        return int(sum(value.size for value in self.params.values()))

    def flat(self) -> np.ndarray:
        return np.concatenate([value.ravel() for value in self.params.values()])

    def same_as(self, other: "ModelWeights") -> bool:
        """Igualdade bit a bit de parâmetros, hiperparâmetros e normalização."""
        if (self.m, self.n, self.K, self.version, self.stats) != (other.m, other.n, other.K, other.version, other.stats):
            return False
        if self.occupancy_scale != other.occupancy_scale or list(self.params) != list(other.params):
            return False
        return all(
            self.params[k].shape == other.params[k].shape and self.params[k].tobytes() == other.params[k].tobytes()
            for k in self.params
        )
