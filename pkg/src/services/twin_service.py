"""Estado do processo da API: arquivo de pesos, modelo implantado e controlador de sincronização."""

import logging
from pathlib import Path
from typing import List, Optional

from fastapi import Request

from src.core.exceptions import ModelNotDeployedError
from src.notifications import LoggingNotificationChannel, NotificationService
from src.schemas.features import LinkFeatures
from src.schemas.records import WeightsEntry
from src.schemas.twin import FlowPrediction, PredictRequest, PredictResponse, TwinStatus
from src.services.datastore_service import WeightsStore
from src.services.feature_service import hypergraph_from_inputs
from src.services.sync_service import DeployedModel, SyncManager

logger = logging.getLogger(__name__)


class TwinRuntime:
    def __init__(self, store: WeightsStore, manager: Optional[SyncManager] = None):
        self.store = store
        self.manager = manager

    @classmethod
    async def open(cls, weights_dir: Path | str, db_url: Optional[str] = None) -> "TwinRuntime":
        """Abre o arquivo de pesos e implanta a versão mais recente, se houver."""
        store = WeightsStore(weights_dir, db_url)
        await store.init()
        runtime = cls(store)
        versions = await store.versions()
        if versions:
            runtime.attach(DeployedModel(await store.load_weights(versions[-1])))
            await runtime.manager.start()
            logger.info("VTwin versão %d implantado", versions[-1])
        else:
            logger.warning("Arquivo de pesos vazio em %s; previsões indisponíveis", weights_dir)
        return runtime

    def attach(self, deployed: DeployedModel) -> None:
        # a API não recebe alertas de deriva: sem treinador, o controlador serve rollback e status
        self.manager = SyncManager(deployed, self.store, notifier=NotificationService([LoggingNotificationChannel()]))

    async def close(self) -> None:
        await self.store.close()

    @property
    def deployed(self) -> DeployedModel:
        if self.manager is None:
            raise ModelNotDeployedError("Nenhum VTwin implantado")
        return self.manager.deployed

    async def status(self) -> TwinStatus:
        versions = await self.store.versions()
        if self.manager is None:
            return TwinStatus(archived_versions=versions)
        w = self.deployed.current
        return TwinStatus(
            deployed_version=w.version,
            mode=self.manager.mode,
            m=w.m,
            n=w.n,
            K=w.K,
            archived_versions=versions,
        )

    def predict(self, request: PredictRequest) -> PredictResponse:
        deployed = self.deployed
        context = {link.link_id: LinkFeatures(capacity=link.capacity, load=link.load) for link in request.links}
        graph = hypergraph_from_inputs(
            [(flow.flow_id, flow.flow_features, tuple(flow.path)) for flow in request.flows], context
        )
        result = deployed.predict(graph)
        return PredictResponse(
            version=result.version,
            predictions=[
                FlowPrediction(flow_id=flow_id, delay=float(delay)) for flow_id, delay in zip(graph.flow_ids, result.y_hat)
            ],
        )

    async def list_weights(self) -> List[WeightsEntry]:
        return await self.store.list_entries()

    async def rollback(self, version: int) -> TwinStatus:
        if self.manager is None:
            raise ModelNotDeployedError("Nenhum VTwin implantado")
        await self.manager.rollback(version)
        return await self.status()


def get_runtime(request: Request) -> TwinRuntime:
    return request.app.state.runtime
