from typing import List

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.validators import validate_probability


class KswinConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(0.001, description="Nível de significância do teste KS.", examples=[0.001])
    window_size: int = Field(300, description="Tamanho da janela deslizante w (amostras).", examples=[300])
    stat_size: int = Field(30, description="Tamanho r do buffer de amostras recentes.", examples=[30])
    seed: int = Field(0, description="Semente da amostragem da referência.")

    @field_validator("alpha")
    @classmethod
    def validate_alpha(cls, v):
        return validate_probability(v)

    @model_validator(mode="after")
    def validate_sizes(self):
        if self.stat_size < 5:
            raise ValueError(f"stat_size deve ser >= 5, recebido {self.stat_size}")
        if self.stat_size >= self.window_size:
            raise ValueError(f"stat_size ({self.stat_size}) deve ser menor que window_size ({self.window_size})")
        # a referência sorteia r amostras sem reposição entre as w - r mais antigas
        if 2 * self.stat_size > self.window_size:
            raise ValueError(f"window_size ({self.window_size}) deve ser ao menos 2 * stat_size ({self.stat_size})")
        return self


class DriftEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    sample_index: int = Field(..., ge=0, description="Índice da amostra que disparou o evento.")
    statistic: float = Field(..., ge=0, le=1, description="Estatística KS D.")
    p_value: float = Field(..., ge=0, le=1, description="p-valor assintótico.")


class DetectorSnapshot(BaseModel):
    samples_seen: int
    window_fill: int
    comparisons: int
    events: List[DriftEvent] = []
