from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class DistributionKind(str, Enum):
    uniform = "uniform"
    exponential = "exponential"
    poisson = "poisson"
    deterministic = "deterministic"


class DistributionSpec(BaseModel):
    """
    Distribuição de tamanho de pacote (bytes) ou de taxa de pacotes (pacotes/s).

    Uniform usa `low`/`high`; Exponential e Poisson usam `mean`; Deterministic usa `value`.
    """

    model_config = ConfigDict(frozen=True)

    kind: DistributionKind = Field(..., description="Tipo da distribuição.", examples=[DistributionKind.exponential])
    low: Optional[float] = Field(None, description="Limite inferior (Uniform).", examples=[512])
    high: Optional[float] = Field(None, description="Limite superior (Uniform).", examples=[1024])
    mean: Optional[float] = Field(None, description="Média (Exponential/Poisson).", examples=[1024])
    value: Optional[float] = Field(None, description="Valor constante K (Deterministic).", examples=[512])

    @model_validator(mode="after")
    def validate_parameters(self):
        if self.kind == DistributionKind.uniform:
            if self.low is None or self.high is None:
                raise ValueError("Uniform exige `low` e `high`")
            if not self.low < self.high:
                raise ValueError(f"Uniform exige low < high (recebido {self.low}, {self.high})")
            if self.low < 0:
                raise ValueError("Uniform exige low >= 0")
        elif self.kind in (DistributionKind.exponential, DistributionKind.poisson):
            if self.mean is None or self.mean <= 0:
                raise ValueError(f"{self.kind.value} exige média estritamente positiva")
        elif self.kind == DistributionKind.deterministic:
            if self.value is None or self.value <= 0:
                raise ValueError("Deterministic exige K estritamente positivo")
        return self

    @classmethod
    def uniform(cls, low: float, high: float) -> "DistributionSpec":
        return cls(kind=DistributionKind.uniform, low=low, high=high)

    @classmethod
    def exponential(cls, mean: float) -> "DistributionSpec":
        return cls(kind=DistributionKind.exponential, mean=mean)

    @classmethod
    def poisson(cls, mean: float) -> "DistributionSpec":
        return cls(kind=DistributionKind.poisson, mean=mean)

    @classmethod
    def deterministic(cls, value: float) -> "DistributionSpec":
        return cls(kind=DistributionKind.deterministic, value=value)

    def scaled(self, factor: float) -> "DistributionSpec":
        """Mesma família com todos os parâmetros multiplicados por `factor`."""
        if factor <= 0:
            raise ValueError("Fator de escala deve ser positivo")
        return DistributionSpec(
            kind=self.kind,
            low=None if self.low is None else self.low * factor,
            high=None if self.high is None else self.high * factor,
            mean=None if self.mean is None else self.mean * factor,
            value=None if self.value is None else self.value * factor,
        )

    def expected_value(self) -> float:
        if self.kind == DistributionKind.uniform:
            return (self.low + self.high) / 2.0
        if self.kind == DistributionKind.deterministic:
            return self.value
        return self.mean


class TrafficPhase(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str = Field("", description="Rótulo da fase (E, P, U, K...).", examples=["E"])
    packet_size: DistributionSpec
    packet_rate: DistributionSpec
    duration: float = Field(..., gt=0, description="Duração da fase em segundos.", examples=[100.0])
    congestion: bool = Field(False, description="Fase com congestionamento induzido.")


class ScenarioSchedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    phases: Tuple[TrafficPhase, ...] = Field(..., min_length=1)

    @property
    def total_duration(self) -> float:
        return float(sum(p.duration for p in self.phases))

    @property
    def boundaries(self) -> list[float]:
        """Instantes de início de cada fase a partir da segunda."""
        edges, acc = [], 0.0
        for phase in self.phases[:-1]:
            acc += phase.duration
            edges.append(acc)
        return edges

    def phase_at(self, t: float) -> int:
        """Índice da fase que contém o instante t (a última fase absorve t >= total)."""
        acc = 0.0
        for index, phase in enumerate(self.phases):
            acc += phase.duration
            if t < acc:
                return index
        return len(self.phases) - 1


class FlowSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    flow_id: int = Field(..., ge=0)
    origin: int = Field(..., ge=0, description="Nó de origem O.")
    destination: int = Field(..., ge=0, description="Nó de destino D.")
    start: float = Field(..., ge=0, description="Início do fluxo em segundos.")
    duration: float = Field(..., gt=0, description="Duração do fluxo em segundos.")
    packet_size: DistributionSpec
    packet_rate: DistributionSpec
    phase: int = Field(0, ge=0, description="Fase do cronograma que contém o início.")

    @model_validator(mode="after")
    def validate_endpoints(self):
        if self.origin == self.destination:
            raise ValueError(f"Fluxo {self.flow_id} com origem e destino iguais ({self.origin})")
        return self

    @property
    def end(self) -> float:
        return self.start + self.duration
