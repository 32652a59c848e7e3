from datetime import datetime
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.schemas.features import FlowFeatures, LabeledExample, LinkFeatures

RECORD_SCHEMA_VERSION = 1

RECORD_UNITS: Dict[str, str] = {
    "timestamp": "s",
    "avg_traffic_rate": "bit/s",
    "path_prop_delay": "s",
    "flow_length": "links",
    "avg_pkts_sent": "pkt/s",
    "avg_pkt_loss": "pkt/s",
    "capacity": "bit/s",
    "load": "fraction",
    "y": "s",
}


class StoreHeader(BaseModel):
    schema_name: str = Field(..., alias="schema")
    schema_version: int = RECORD_SCHEMA_VERSION
    units: Dict[str, str] = Field(default_factory=lambda: dict(RECORD_UNITS))

    model_config = ConfigDict(populate_by_name=True)


class TrafficRecord(BaseModel):
    """Registro da base de tráfego: features do fluxo sem o rótulo de atraso."""

    model_config = ConfigDict(frozen=True)

    flow_id: int = Field(..., ge=0)
    timestamp: float = Field(..., ge=0, description="Fim da medição do fluxo (s).")
    snapshot_id: Optional[int] = Field(None, description="Snapshot de medição de origem.")
    phase: int = Field(0, ge=0, description="Fase do cronograma.")
    origin: int = Field(..., ge=0)
    destination: int = Field(..., ge=0)
    path: Tuple[int, ...] = Field(..., min_length=1)
    flow_features: FlowFeatures


class LabeledRecord(TrafficRecord):
    """Registro da base rotulada: features, contexto dos enlaces do caminho e y."""

    link_context: Tuple[LinkFeatures, ...]
    y: float = Field(..., gt=0, description="Atraso médio por fluxo (s).")

    @model_validator(mode="after")
    def validate_label(self):
        if len(self.link_context) != len(self.path):
            raise ValueError(f"Fluxo {self.flow_id}: contexto com {len(self.link_context)} enlaces para caminho de {len(self.path)}")
        if self.y < self.flow_features.path_prop_delay:
            raise ValueError(f"Fluxo {self.flow_id}: y={self.y} menor que a propagação do caminho")
        return self

    def to_example(self) -> LabeledExample:
        return LabeledExample(
            flow_id=self.flow_id,
            snapshot_id=self.snapshot_id,
            flow_features=self.flow_features,
            path=self.path,
            link_context=self.link_context,
            y=self.y,
        )


class WeightsEntry(BaseModel):
    """Entrada do arquivo de pesos (índice SQL + arquivo binário)."""

    model_config = ConfigDict(from_attributes=True)

    version: int = Field(..., ge=0)
    created_at: Optional[datetime] = None
    digest: str = Field(..., min_length=64, max_length=64, description="SHA-256 do payload.")
    path: str
    size_bytes: int = Field(..., ge=0)
    reason: Optional[str] = None


class CorruptLine(BaseModel):
    line: int
    reason: str
