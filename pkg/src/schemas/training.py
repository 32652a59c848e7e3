from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(0.001, gt=0, description="Taxa de aprendizado do Adam.")
    epochs: int = Field(50, ge=0, description="Número de épocas.")
    batch_size: int = Field(32, ge=1, description="Snapshots por lote.")
    beta1: float = Field(0.9, gt=0, lt=1)
    beta2: float = Field(0.999, gt=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    seed: int = Field(0, description="Semente do embaralhamento e da divisão treino/validação.")
    validation_fraction: float = Field(0.1, ge=0, lt=1, description="Fração reservada para validação.")
    label_floor: float = Field(1e-6, gt=0, description="Piso dos rótulos no denominador do MAPE (s).")


class EpochReport(BaseModel):
    epoch: int
    mean_loss: float
    batches: int


class TrainingSummary(BaseModel):
    """Resumo serializável de uma execução de treino."""

    version: int
    epochs: int
    history: List[float]
    validation_mape: Optional[float] = None
    train_snapshots: int
    validation_snapshots: int
    clamped_labels: int = 0
