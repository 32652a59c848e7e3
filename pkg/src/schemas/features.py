from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.validators import validate_finite

FLOW_FEATURE_NAMES = ("avg_traffic_rate", "path_prop_delay", "flow_length", "avg_pkts_sent", "avg_pkt_loss")
LINK_FEATURE_NAMES = ("capacity", "load")


class FlowFeatures(BaseModel):
    """Vetor x_f de 5 features de um fluxo."""

    model_config = ConfigDict(frozen=True)

    avg_traffic_rate: float = Field(..., ge=0, description="Taxa média de tráfego em bits/s.")
    path_prop_delay: float = Field(..., ge=0, description="Atraso de propagação do caminho em segundos.")
    flow_length: int = Field(..., ge=1, description="Número de enlaces do caminho (J).")
    avg_pkts_sent: float = Field(..., ge=0, description="Pacotes enviados por janela de 1 s.")
    avg_pkt_loss: float = Field(..., ge=0, description="Pacotes perdidos por segundo.")

    @field_validator("avg_traffic_rate", "path_prop_delay", "avg_pkts_sent", "avg_pkt_loss")
    @classmethod
    def validate_finite_values(cls, v):
        return validate_finite(v)

    def to_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FLOW_FEATURE_NAMES], dtype=np.float64)


class LinkFeatures(BaseModel):
    """Vetor x_e de 2 features de um enlace."""

    model_config = ConfigDict(frozen=True)

    capacity: float = Field(..., gt=0, description="Capacidade em bits/s.")
    load: float = Field(..., ge=0, le=1, description="Fração ocupada da capacidade.")

    def to_vector(self) -> np.ndarray:
        return np.array([self.capacity, self.load], dtype=np.float64)


@dataclass(frozen=True)
class HeteroGraph:
    """
    Hipergrafo bipartido fluxo <-> enlace.

    `paths[t]` lista os índices locais de enlace do fluxo t na ordem do caminho;
    `link_flows[l]` é o dual (fluxos que usam o enlace l, em ordem crescente).
    As features ficam em unidades físicas; a normalização é feita pelo modelo.
    """

    flow_features: np.ndarray  # T x 5
    link_features: np.ndarray  # L x 2
    paths: Tuple[Tuple[int, ...], ...]
    link_flows: Tuple[Tuple[int, ...], ...]
    link_ids: Tuple[int, ...] = ()
    flow_ids: Tuple[int, ...] = ()
    labels: Optional[np.ndarray] = None

    @property
    def flow_count(self) -> int:
        return len(self.paths)

    @property
    def link_count(self) -> int:
        return len(self.link_flows)

    @property
    def capacities(self) -> np.ndarray:
        return self.link_features[:, 0]

    @cached_property
    def max_path_length(self) -> int:
        return max((len(p) for p in self.paths), default=0)

    @cached_property
    def padded_paths(self) -> Tuple[np.ndarray, np.ndarray]:
        """(índices T x P, máscara T x P) com caminhos completados por zeros."""
        width = max(self.max_path_length, 1)
        index = np.zeros((self.flow_count, width), dtype=np.int64)
        mask = np.zeros((self.flow_count, width), dtype=np.float64)
        for t, path in enumerate(self.paths):
            index[t, : len(path)] = path
            mask[t, : len(path)] = 1.0
        return index, mask

    @cached_property
    def incidence_pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        """Pares (fluxo, enlace) ordenados por enlace e depois por fluxo."""
        flows: List[int] = []
        links: List[int] = []
        for link, members in enumerate(self.link_flows):
            for t in members:
                flows.append(t)
                links.append(link)
        return np.array(flows, dtype=np.int64), np.array(links, dtype=np.int64)

    @cached_property
    def path_incidence(self) -> Tuple[np.ndarray, np.ndarray]:
        """Pares (fluxo, enlace) ordenados por fluxo e posição no caminho."""
        flows = [t for t, path in enumerate(self.paths) for _ in path]
        links = [j for path in self.paths for j in path]
        return np.array(flows, dtype=np.int64), np.array(links, dtype=np.int64)


class ZScoreStats(BaseModel):
    """Média e desvio padrão populacional por feature, ajustados no conjunto de treino."""

    model_config = ConfigDict(frozen=True)

    flow_mean: Tuple[float, ...] = Field(..., min_length=5, max_length=5)
    flow_std: Tuple[float, ...] = Field(..., min_length=5, max_length=5)
    link_mean: Tuple[float, ...] = Field(..., min_length=2, max_length=2)
    link_std: Tuple[float, ...] = Field(..., min_length=2, max_length=2)

    def as_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.asarray(self.flow_mean, dtype=np.float64),
            np.asarray(self.flow_std, dtype=np.float64),
            np.asarray(self.link_mean, dtype=np.float64),
            np.asarray(self.link_std, dtype=np.float64),
        )


class LabeledExample(BaseModel):
    """Um fluxo rotulado: features, caminho, contexto dos enlaces do caminho e y."""

    model_config = ConfigDict(frozen=True)

    flow_id: int
    snapshot_id: Optional[int] = None
    flow_features: FlowFeatures
    path: Tuple[int, ...]
    link_context: Tuple[LinkFeatures, ...]
    y: float = Field(..., gt=0, description="Atraso médio por fluxo em segundos.")
