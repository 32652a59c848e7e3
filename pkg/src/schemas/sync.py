from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field

from src.schemas.drift import DriftEvent


class SyncMode(str, Enum):
    idle = "idle"
    retraining = "retraining"


class SyncState(BaseModel):
    mode: SyncMode = Field(SyncMode.idle, description="Idle ou Retraining (gatilho travado).")
    deployed_version: int = Field(..., ge=0, description="Versão dos pesos em serviço.")
    last_event: Optional[DriftEvent] = None
    retrains: int = Field(0, ge=0, description="Retreinos concluídos e implantados.")
    ignored_events: int = Field(0, ge=0, description="Eventos recebidos com o gatilho travado.")
    archived_versions: List[int] = Field(default_factory=list)

    @property
    def trigger_locked(self) -> bool:
        return self.mode == SyncMode.retraining
