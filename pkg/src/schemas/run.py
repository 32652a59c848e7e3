from enum import Enum
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core.config import settings
from src.schemas.drift import KswinConfig
from src.schemas.evaluation import DriftComparison, SlaPolicy, ViolationReport
from src.schemas.training import TrainConfig, TrainingSummary
from src.validators import validate_existing_path, validate_schedule_ref


class RetrainScope(str, Enum):
    phase = "phase"
    all = "all"


class RunStatus(str, Enum):
    completed = "completed"
    failed = "failed"


class RunConfig(BaseModel):
    """Configuração validada de uma execução de cenário (CLI ou testes)."""

    model_config = ConfigDict(frozen=True)

    topology: Path = Field(default_factory=lambda: Path(settings.DEFAULT_TOPOLOGY), description="Arquivo de topologia.")
    schedule: str = Field(settings.DEFAULT_SCHEDULE, description="Arquivo de cronograma ou `default:<segundos>`.", examples=["default:400"])
    seed: int = Field(settings.SEED, description="Semente de toda a execução.")
    sync: bool = Field(True, description="Liga o gatilho de retreino.")
    compare: bool = Field(False, description="Calcula também a série do modelo congelado.")
    kswin: KswinConfig = Field(
        default_factory=lambda: KswinConfig(
            alpha=settings.KSWIN_ALPHA,
            window_size=settings.KSWIN_WINDOW,
            stat_size=settings.KSWIN_STAT_SIZE,
            seed=settings.SEED,
        )
    )
    train: TrainConfig = Field(
        default_factory=lambda: TrainConfig(
            learning_rate=settings.TRAIN_LR,
            epochs=settings.TRAIN_EPOCHS,
            batch_size=settings.TRAIN_BATCH_SIZE,
            seed=settings.SEED,
        )
    )
    pdb: SlaPolicy = Field(default_factory=lambda: SlaPolicy(beta=settings.PDB_BETA, floor=settings.PDB_FLOOR_S))
    out: Path = Field(default_factory=lambda: Path(settings.DATA_DIR), description="Diretório de saída.")

    flows_per_second: float = Field(settings.FLOWS_PER_SECOND, gt=0)
    flow_duration: float = Field(settings.FLOW_DURATION_S, gt=0)
    snapshot_s: float = Field(settings.SNAPSHOT_S, gt=0, description="Duração de um snapshot de medição.")
    dataset_snapshots: int = Field(settings.DATASET_SNAPSHOTS, ge=1, description="Snapshots por dataset rotulado de fase.")
    embed_dim: int = Field(settings.EMBED_DIM, ge=1, description="m = n.")
    mp_iterations: int = Field(settings.MP_ITERATIONS, ge=0, description="K.")
    nmse_window: int = Field(settings.NMSE_WINDOW, ge=1)
    retrain_lag: int = Field(settings.RETRAIN_LAG_SNAPSHOTS, ge=0, description="Snapshots servidos pelo modelo antigo após o do gatilho (0: o próprio snapshot do gatilho já usa o modelo novo).")
    retrain_scope: RetrainScope = Field(RetrainScope(settings.RETRAIN_SCOPE))

    @field_validator("topology")
    @classmethod
    def validate_topology(cls, v):
        return validate_existing_path(v)

    @field_validator("schedule")
    @classmethod
    def validate_schedule(cls, v):
        return validate_schedule_ref(v)


class SlaTotals(BaseModel):
    total_flows: int
    predicted_violations: int
    actual_violations: int
    misclassified: int

    @classmethod
    def of(cls, report: ViolationReport) -> "SlaTotals":
        return cls(
            total_flows=report.total_flows,
            predicted_violations=report.predicted_violations,
            actual_violations=report.actual_violations,
            misclassified=report.misclassified,
        )


class RunSummary(BaseModel):
    """Conteúdo do summary.json: só valores determinísticos (sem horário de parede)."""

    status: RunStatus = RunStatus.completed
    error: Optional[str] = None
    partial: bool = False
    topology: str = ""
    schedule: str = ""
    seed: int = 0
    sync: bool = True
    compare: bool = False
    flows: int = 0
    snapshots: int = 0
    phase_boundaries: List[int] = Field(default_factory=list, description="Índice da primeira amostra de cada fase após a primeira.")
    detections: int = 0
    retrains: int = 0
    ignored_events: int = 0
    deployed_versions: List[int] = Field(default_factory=list)
    mean_nmse_sync: Optional[float] = None
    mean_nmse_frozen: Optional[float] = None
    sla_sync: Optional[SlaTotals] = None
    sla_frozen: Optional[SlaTotals] = None
    drifts: List[DriftComparison] = Field(default_factory=list)
    training: List[TrainingSummary] = Field(default_factory=list)


class WindowSweepRow(BaseModel):
    window_size: int = Field(..., ge=1)
    detections: int = Field(..., ge=0)
