from http import HTTPStatus

from fastapi import APIRouter, Body, Depends, HTTPException
from fastapi.concurrency import run_in_threadpool

from src.core.exceptions import FeatureError, ModelError, ModelNotDeployedError
from src.schemas.twin import PredictRequest, PredictResponse, TwinStatus
from src.services.twin_service import TwinRuntime, get_runtime

router = APIRouter()


@router.get("/status", response_model=TwinStatus)
async def twin_status_endpoint(runtime: TwinRuntime = Depends(get_runtime)):
    """
    **Estado do gêmeo virtual**

    Retorna a versão dos pesos em serviço, o modo do controlador de sincronização
    (`idle` ou `retraining`), os hiperparâmetros m, n, K e as versões arquivadas.
    Sem modelo implantado, `deployed_version` vem vazio.
    """
    return await runtime.status()


@router.post("/predict", response_model=PredictResponse)
async def predict_endpoint(
    request: PredictRequest = Body(..., description="Fluxos e enlaces de um snapshot"),
    runtime: TwinRuntime = Depends(get_runtime),
):
    """
    **Previsão de atraso por fluxo**

    Monta o hipergrafo fluxo <-> enlace do snapshot e aplica o VTwin implantado.

    **Corpo da Requisição (`PredictRequest`):**
    - `flows`: lista de fluxos com `flow_id`, `flow_features` (x_f) e `path` (IDs de enlace em ordem)
    - `links`: features (capacidade, carga) de cada enlace usado

    **Regras:**
    - `flow_length` de cada fluxo deve ser igual ao tamanho do caminho
    - Todas as previsões da resposta vêm da mesma versão de pesos, informada em `version`

    **Respostas de Erro:**
    - `422 Unprocessable Entity`: payload inválido
    - `503 Service Unavailable`: nenhum modelo implantado
    """
    try:
        return await run_in_threadpool(runtime.predict, request)
    except ModelNotDeployedError as e:
        raise HTTPException(status_code=HTTPStatus.SERVICE_UNAVAILABLE, detail=str(e))
    except (FeatureError, ModelError) as e:
        raise HTTPException(status_code=HTTPStatus.UNPROCESSABLE_ENTITY, detail=str(e))
