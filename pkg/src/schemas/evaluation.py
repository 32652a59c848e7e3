from typing import List, Optional

from pydantic import BaseModel, Field, field_validator


class SlaPolicy(BaseModel):
    """PDB = max(piso, beta * atraso de propagação do caminho)."""

    beta: float = Field(3.0, gt=0, description="Multiplicador da propagação do caminho.", examples=[3.0])
    floor: float = Field(0.001, gt=0, description="Piso do PDB em segundos.", examples=[0.001])


class NmseWindow(BaseModel):
    index: int = Field(..., ge=0)
    size: int = Field(..., ge=1)
    nmse_db: float = Field(..., description="NMSE da janela em dB (-inf quando o erro é nulo).")
    partial: bool = Field(False, description="Última janela com menos exemplos que o tamanho pedido.")


class ViolationWindow(BaseModel):
    index: int
    size: int
    predicted_violations: int
    actual_violations: int
    misclassified: int
    partial: bool = False


class ViolationReport(BaseModel):
    total_flows: int = Field(..., ge=0)
    predicted_violations: int = Field(..., ge=0)
    actual_violations: int = Field(..., ge=0)
    misclassified: int = Field(..., ge=0)
    windows: List[ViolationWindow] = Field(default_factory=list)

    @field_validator("misclassified")
    @classmethod
    def validate_misclassified(cls, v, info):
        total = info.data.get("total_flows")
        if total is not None and v > total:
            raise ValueError(f"misclassified ({v}) maior que o total de fluxos ({total})")
        return v


class DriftComparison(BaseModel):
    """Linha da tabela de NMSE antes/depois de cada deriva detectada."""

    drift_index: int
    sample_index: int
    nearest_boundary: Optional[int] = None
    detection_delay: Optional[int] = None
    pre_nmse_sync: Optional[float] = None
    post_nmse_sync: Optional[float] = None
    pre_nmse_frozen: Optional[float] = None
    post_nmse_frozen: Optional[float] = None
    post_mse_improvement: Optional[float] = Field(None, description="Redução relativa do MSE linear pós-deriva.")
