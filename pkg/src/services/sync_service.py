"""
Controlador de sincronização: recebe alertas de deriva, trava o gatilho,
retreina o gêmeo virtual sobre a base rotulada, arquiva os pesos antigos e
implanta os novos com troca atômica.
"""

import asyncio
import logging
import threading
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from src.core.exceptions import SyncError, SyncStateError, TrainingDivergedError, WeightsNotFoundError
from src.notifications import NotificationService
from src.schemas.drift import DriftEvent
from src.schemas.features import HeteroGraph
from src.schemas.sync import SyncMode, SyncState
from src.schemas.training import EpochReport, TrainConfig
from src.schemas.vtwin import ModelWeights
from src.services.datastore_service import WeightsStore
from src.services.training_service import TrainingResult, train
from src.services.vtwin.model import init_weights, predict_delay

logger = logging.getLogger(__name__)

DatasetProvider = Callable[[], Sequence[HeteroGraph]]
Trainer = Callable[[Sequence[HeteroGraph], int], TrainingResult]


@dataclass(frozen=True)
class VersionedPrediction:
    version: int
    y_hat: np.ndarray


class DeployedModel:
    """Referência aos pesos em serviço; troca e leitura sob o mesmo lock."""

    def __init__(self, weights: ModelWeights):
        self._lock = threading.Lock()
        self._weights = weights

    @property
    def current(self) -> ModelWeights:
        with self._lock:
            return self._weights

    @property
    def version(self) -> int:
        return self.current.version

    def swap(self, weights: ModelWeights) -> ModelWeights:
        with self._lock:
            previous, self._weights = self._weights, weights
        return previous

    def predict(self, graph: HeteroGraph) -> VersionedPrediction:
        weights = self.current
        return VersionedPrediction(version=weights.version, y_hat=predict_delay(graph, weights))


def fresh_trainer(
    cfg: TrainConfig,
    m: int,
    n: int,
    K: int,
    seed: int,
    on_epoch: Optional[Callable[[int, EpochReport], None]] = None,
) -> Trainer:
    """Retreino a partir de inicialização nova (sem warm start) com a versão pedida."""

    def _train(data: Sequence[HeteroGraph], version: int) -> TrainingResult:
        w0 = init_weights(np.random.default_rng([seed, version]), m, n, K).copy(version=version - 1)
        callback = None if on_epoch is None else (lambda report: on_epoch(version, report))
        return train(w0, data, cfg.model_copy(update={"seed": cfg.seed + version}), on_epoch=callback)

    return _train


class SyncManager:
    def __init__(
        self,
        deployed: DeployedModel,
        store: WeightsStore,
        dataset_provider: Optional[DatasetProvider] = None,
        trainer: Optional[Trainer] = None,
        notifier: Optional[NotificationService] = None,
        auto_complete: bool = False,
    ):
        self.deployed = deployed
        self.store = store
        self.dataset_provider = dataset_provider
        self.trainer = trainer
        self.notifier = notifier or NotificationService()
        self.auto_complete = auto_complete
        self._lock = asyncio.Lock()
        self._mode = SyncMode.idle
        self._last_event: Optional[DriftEvent] = None
        self._task: Optional[asyncio.Task] = None
        self._max_version = deployed.version
        self.retrains = 0
        self.ignored_events = 0
        self.histories: List[TrainingResult] = []

    async def start(self) -> None:
        versions = await self.store.versions()
        self._max_version = max([self.deployed.version, *versions])

    @property
    def mode(self) -> SyncMode:
        return self._mode

    async def state(self) -> SyncState:
        return SyncState(
            mode=self._mode,
            deployed_version=self.deployed.version,
            last_event=self._last_event,
            retrains=self.retrains,
            ignored_events=self.ignored_events,
            archived_versions=await self.store.versions(),
        )

    async def _control(self, event: str, **extra) -> None:
        await self.notifier.notify(
            event, {"mode": self._mode.value, "version": self.deployed.version, **extra}
        )

    async def on_drift(self, event: DriftEvent) -> bool:
        """
        Idle: trava o gatilho, tira um snapshot da base rotulada e dispara o treino.
        Retraining: o evento é registrado e ignorado. Sem treinador (modo só de serviço)
        o evento também é ignorado. Retorna True se iniciou treino.
        """
        async with self._lock:
            self._last_event = event
            if self._mode == SyncMode.retraining:
                self.ignored_events += 1
                await self._control("drift_ignored", sample_index=event.sample_index)
                return False
            if self.trainer is None or self.dataset_provider is None:
                await self._control("drift_no_trainer", sample_index=event.sample_index)
                return False
            snapshot = list(self.dataset_provider())
            if not snapshot:
                await self._control("drift_no_data", sample_index=event.sample_index)
                return False
            self._mode = SyncMode.retraining
            version = self._max_version + 1
            self._task = asyncio.create_task(self._run_training(snapshot, version))
            await self._control("retrain_started", sample_index=event.sample_index, target_version=version)
            return True

    async def _run_training(self, snapshot: Sequence[HeteroGraph], version: int) -> Optional[TrainingResult]:
        try:
            result = await asyncio.to_thread(self.trainer, snapshot, version)
        except TrainingDivergedError as e:
            logger.error("Retreino divergiu: %s", e)
            await self._abort("retrain_diverged", e)
            return None
        except Exception as e:
            logger.exception("Retreino da versão %d falhou", version)
            await self._abort("retrain_failed", e)
            return None
        if self.auto_complete:
            await self.on_retrain_complete(result.weights)
        return result

    async def _abort(self, event: str, error: Exception) -> None:
        """Mantém os pesos em serviço e libera o gatilho."""
        async with self._lock:
            self._mode = SyncMode.idle
            await self._control(event, error=f"{type(error).__name__}: {error}")

    @property
    def retraining_in_flight(self) -> bool:
        return self._task is not None and not self._task.done()

    async def finish_retrain(self) -> Optional[ModelWeights]:
        """Aguarda o treino em andamento e implanta o resultado."""
        if self._task is None:
            return None
        task, self._task = self._task, None
        result = await task
        if result is None:
            return None
        self.histories.append(result)
        if not self.auto_complete:
            await self.on_retrain_complete(result.weights)
        return result.weights

    async def on_retrain_complete(self, new_w: ModelWeights) -> None:
        """
        Arquiva os pesos em serviço e implanta `new_w`. Em falha de persistência o
        gerenciador continua em Retraining com os pesos antigos.
        """
        async with self._lock:
            if self._mode != SyncMode.retraining:
                raise SyncStateError(f"Conclusão de retreino recebida no modo {self._mode.value}")
            if new_w.version != self._max_version + 1:
                raise SyncError(f"Versão {new_w.version} fora de sequência (esperado {self._max_version + 1})")
            old = self.deployed.current
            try:
                if not await self.store.has_version(old.version):
                    await self.store.save_weights(old, reason="archive")
            except Exception as e:
                await self._control("archive_failed", error=str(e))
                raise SyncError(f"Falha ao arquivar a versão {old.version}: {e}") from e
            self.deployed.swap(new_w)
            self._max_version = new_w.version
            self._mode = SyncMode.idle
            self.retrains += 1
            await self._control("deployed", previous_version=old.version)

    async def rollback(self, version: int) -> None:
        async with self._lock:
            if self._mode != SyncMode.idle:
                raise SyncStateError("Rollback recusado: retreino em andamento")
            if not await self.store.has_version(version):
                raise WeightsNotFoundError(f"Versão {version} não encontrada no arquivo de pesos")
            restored = await self.store.load_weights(version)
            old = self.deployed.current
            if not await self.store.has_version(old.version):
                await self.store.save_weights(old, reason="archive")
            self.deployed.swap(restored)
            await self._control("rollback", previous_version=old.version)
