from http import HTTPStatus

from fastapi import APIRouter, Body, HTTPException

from src.core.exceptions import MetricError
from src.schemas.evaluation import ViolationReport
from src.schemas.twin import SlaReportRequest
from src.services.evaluation_service import classify_and_report

router = APIRouter()


@router.post("/report", response_model=ViolationReport)
async def sla_report_endpoint(request: SlaReportRequest = Body(..., description="Atrasos previstos, medidos e PDBs")):
    """
    **Relatório de violações de SLA**

    Um fluxo viola o SLA quando o atraso excede o seu PDB. A violação prevista usa
    `y_hat`, a real usa `y`; `misclassified` conta as divergências. As contagens
    por janela usam janelas consecutivas de `window` fluxos.

    **Respostas de Erro:**
    - `422 Unprocessable Entity`: vetores com tamanhos diferentes
    """
    try:
        return classify_and_report(request.y_hat, request.y, request.pdb, request.window)
    except MetricError as e:
        raise HTTPException(status_code=HTTPStatus.UNPROCESSABLE_ENTITY, detail=str(e))
