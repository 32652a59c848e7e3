from http import HTTPStatus
from typing import List

from fastapi import APIRouter, Depends, HTTPException, Path

from src.core.exceptions import CorruptRecordError, ModelNotDeployedError, SyncStateError, WeightsNotFoundError
from src.schemas.records import WeightsEntry
from src.schemas.twin import TwinStatus
from src.services.twin_service import TwinRuntime, get_runtime

router = APIRouter()


@router.get("/", response_model=List[WeightsEntry])
async def list_weights_endpoint(runtime: TwinRuntime = Depends(get_runtime)):
    """
    **Arquivo de pesos**

    Lista as versões arquivadas em ordem crescente, com digest SHA-256, tamanho
    do payload e motivo do arquivamento (`initial`, `archive`, `final`).
    """
    return await runtime.list_weights()


@router.post("/{version}/rollback", response_model=TwinStatus)
async def rollback_endpoint(
    version: int = Path(..., ge=0, description="Versão arquivada a implantar"),
    runtime: TwinRuntime = Depends(get_runtime),
):
    """
    **Rollback do VTwin**

    Implanta uma versão do arquivo de pesos. Os pesos em serviço são arquivados
    antes da troca, que é atômica para as previsões.

    **Respostas de Erro:**
    - `404 Not Found`: versão inexistente
    - `409 Conflict`: retreino em andamento
    - `500 Internal Server Error`: arquivo da versão corrompido
    - `503 Service Unavailable`: nenhum modelo implantado
    """
    try:
        return await runtime.rollback(version)
    except WeightsNotFoundError as e:
        raise HTTPException(status_code=HTTPStatus.NOT_FOUND, detail=str(e))
    except SyncStateError as e:
        raise HTTPException(status_code=HTTPStatus.CONFLICT, detail=str(e))
    except CorruptRecordError as e:
        raise HTTPException(status_code=HTTPStatus.INTERNAL_SERVER_ERROR, detail=str(e))
    except ModelNotDeployedError as e:
        raise HTTPException(status_code=HTTPStatus.SERVICE_UNAVAILABLE, detail=str(e))
