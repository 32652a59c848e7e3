from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from src.schemas.features import FlowFeatures
from src.schemas.sync import SyncMode


class LinkInput(BaseModel):
    link_id: int = Field(..., ge=0, description="ID do enlace na topologia.", examples=[3])
    capacity: float = Field(..., gt=0, description="Capacidade em bits/s.", examples=[1_000_000])
    load: float = Field(..., ge=0, le=1, description="Fração ocupada da capacidade.", examples=[0.42])


class FlowInput(BaseModel):
    flow_id: int = Field(..., ge=0, description="ID do fluxo.", examples=[17])
    flow_features: FlowFeatures = Field(..., description="Features x_f do fluxo.")
    path: List[int] = Field(..., min_length=1, description="Enlaces do caminho, em ordem.", examples=[[0, 4, 7]])

    @model_validator(mode="after")
    def validate_length(self):
        if self.flow_features.flow_length != len(self.path):
            raise ValueError(
                f"Fluxo {self.flow_id}: flow_length {self.flow_features.flow_length} difere do caminho com {len(self.path)} enlaces"
            )
        return self


class PredictRequest(BaseModel):
    flows: List[FlowInput] = Field(..., min_length=1, description="Fluxos do snapshot.")
    links: List[LinkInput] = Field(..., min_length=1, description="Features dos enlaces usados pelos fluxos.")

    @model_validator(mode="after")
    def validate_links(self):
        known = {link.link_id for link in self.links}
        if len(known) != len(self.links):
            raise ValueError("IDs de enlace repetidos")
        for flow in self.flows:
            missing = [j for j in flow.path if j not in known]
            if missing:
                raise ValueError(f"Fluxo {flow.flow_id} usa enlaces sem features: {missing}")
        return self


class FlowPrediction(BaseModel):
    flow_id: int
    delay: float = Field(..., ge=0, description="Atraso médio previsto em segundos.")


class PredictResponse(BaseModel):
    version: int = Field(..., description="Versão dos pesos que gerou todas as previsões.")
    predictions: List[FlowPrediction]


class TwinStatus(BaseModel):
    deployed_version: Optional[int] = Field(None, description="Versão em serviço (vazio sem modelo).")
    mode: SyncMode = SyncMode.idle
    m: Optional[int] = None
    n: Optional[int] = None
    K: Optional[int] = None
    archived_versions: List[int] = Field(default_factory=list)


class SlaReportRequest(BaseModel):
    y_hat: List[float] = Field(..., min_length=1, description="Atrasos previstos (s).")
    y: List[float] = Field(..., min_length=1, description="Atrasos medidos (s).")
    pdb: List[float] = Field(..., min_length=1, description="PDB de cada fluxo (s).")
    window: int = Field(100, ge=1, description="Tamanho da janela das contagens.")
