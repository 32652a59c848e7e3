import asyncio
import threading
from unittest.mock import AsyncMock, MagicMock

import numpy as np
import pytest

from src.core.exceptions import FeatureError, SyncError, SyncStateError, TrainingDivergedError, WeightsNotFoundError
from src.notifications.notification_service import NotificationService
from src.schemas.drift import DriftEvent
from src.schemas.sync import SyncMode
from src.schemas.training import TrainConfig
from src.services.datastore_service import WeightsStore
from src.services.sync_service import DeployedModel, SyncManager, fresh_trainer
from src.services.training_service import TrainingResult
from src.services.vtwin import predict_delay
from tests.conftest import fitted_weights


def _event(index=100):
    return DriftEvent(sample_index=index, statistic=1.0, p_value=1e-6)


class ControlledTrainer:
    """Treinador falso que devolve pesos novos com a versão pedida, liberado por um evento."""

    def __init__(self, base, block=False, error=None):
        self.base = base
        self.release = threading.Event()
        if not block:
            self.release.set()
        self.error = error
        self.calls = []

    def __call__(self, data, version):
        self.calls.append((len(data), version))
        self.release.wait(timeout=10)
        if self.error is not None:
            raise self.error
        rng = np.random.default_rng(version)
        w = self.base.copy(version=version)
        for value in w.params.values():
            value += rng.normal(scale=0.05, size=value.shape)
        return TrainingResult(weights=w, history=[1.0])


@pytest.fixture
def mock_notifier():
    """Fixture que fornece um serviço de notificação mockado."""
    notifier = MagicMock(spec=NotificationService)
    notifier.notify = AsyncMock()
    return notifier


@pytest.fixture
async def weights_store(tmp_path):
    store = WeightsStore(tmp_path / "weights")
    await store.init()
    yield store
    await store.close()


@pytest.fixture
def base_weights(small_graphs):
    return fitted_weights(small_graphs).copy(version=1)


def _events(notifier):
    return [c.args[0] for c in notifier.notify.call_args_list]


async def _manager(store, base, trainer, notifier, graphs, **kwargs):
    await store.save_weights(base, reason="initial")
    manager = SyncManager(DeployedModel(base), store, lambda: graphs, trainer, notifier=notifier, **kwargs)
    await manager.start()
    return manager


async def test_drift_triggers_retrain(weights_store, base_weights, small_graphs, mock_notifier):
    """Testa o ciclo completo: alerta, retreino, arquivamento e implantação."""
    trainer = ControlledTrainer(base_weights)
    manager = await _manager(weights_store, base_weights, trainer, mock_notifier, small_graphs)

    assert await manager.on_drift(_event()) is True
    assert manager.mode == SyncMode.retraining
    deployed = await manager.finish_retrain()

    assert deployed.version == 2
    assert manager.deployed.version == 2
    assert manager.mode == SyncMode.idle
    assert manager.retrains == 1
    assert trainer.calls == [(len(small_graphs), 2)]
    assert await weights_store.versions() == [1]
    assert _events(mock_notifier) == ["retrain_started", "deployed"]
    state = await manager.state()
    assert state.deployed_version == 2
    assert state.last_event == _event()


async def test_trigger_locked_during_retrain(weights_store, base_weights, small_graphs, mock_notifier):
    """Testa que alertas durante o retreino são ignorados e contados."""
    trainer = ControlledTrainer(base_weights, block=True)
    manager = await _manager(weights_store, base_weights, trainer, mock_notifier, small_graphs)

    assert await manager.on_drift(_event(100)) is True
    assert (await manager.state()).trigger_locked
    assert await manager.on_drift(_event(150)) is False
    assert await manager.on_drift(_event(160)) is False
    assert manager.ignored_events == 2
    assert manager.deployed.version == 1

    trainer.release.set()
    await manager.finish_retrain()
    assert len(trainer.calls) == 1
    assert manager.deployed.version == 2


async def test_sequential_versions(weights_store, base_weights, small_graphs, mock_notifier):
    """Testa que retreinos sucessivos geram versões consecutivas e arquivam as anteriores."""
    manager = await _manager(weights_store, base_weights, ControlledTrainer(base_weights), mock_notifier, small_graphs)
    for expected in (2, 3, 4):
        await manager.on_drift(_event())
        assert (await manager.finish_retrain()).version == expected
    assert await weights_store.versions() == [1, 2, 3]
    assert manager.deployed.version == 4


async def test_no_data_keeps_idle(weights_store, base_weights, mock_notifier):
    """Testa que um alerta sem dados rotulados não trava o gatilho."""
    manager = await _manager(weights_store, base_weights, ControlledTrainer(base_weights), mock_notifier, [])
    assert await manager.on_drift(_event()) is False
    assert manager.mode == SyncMode.idle
    assert _events(mock_notifier) == ["drift_no_data"]


async def test_serving_only_manager_ignores_drift(weights_store, base_weights, mock_notifier):
    """Testa que um controlador sem treinador ignora alertas e segue Idle."""
    manager = SyncManager(DeployedModel(base_weights), weights_store, notifier=mock_notifier)
    await manager.start()
    assert await manager.on_drift(_event()) is False
    assert manager.mode == SyncMode.idle
    assert manager.deployed.version == 1
    assert _events(mock_notifier) == ["drift_no_trainer"]


async def test_divergence_keeps_old_weights(weights_store, base_weights, small_graphs, mock_notifier):
    """Testa que um treino divergente mantém os pesos em serviço e volta a Idle."""
    trainer = ControlledTrainer(base_weights, error=TrainingDivergedError("perda não finita"))
    manager = await _manager(weights_store, base_weights, trainer, mock_notifier, small_graphs)
    await manager.on_drift(_event())
    assert await manager.finish_retrain() is None
    assert manager.mode == SyncMode.idle
    assert manager.deployed.version == 1
    assert "retrain_diverged" in _events(mock_notifier)


@pytest.mark.parametrize("auto_complete", [False, True])
async def test_trainer_error_releases_trigger(weights_store, base_weights, small_graphs, mock_notifier, auto_complete):
    """Testa que qualquer erro do treino volta a Idle e o próximo alerta dispara novo retreino."""
    trainer = ControlledTrainer(base_weights, error=FeatureError("snapshot sem enlaces"))
    manager = await _manager(
        weights_store, base_weights, trainer, mock_notifier, small_graphs, auto_complete=auto_complete
    )
    assert await manager.on_drift(_event(100)) is True
    assert await manager.finish_retrain() is None

    assert manager.mode == SyncMode.idle
    assert manager.deployed.version == 1
    assert manager.retrains == 0
    failed = [c for c in mock_notifier.notify.call_args_list if c.args[0] == "retrain_failed"]
    assert len(failed) == 1
    assert failed[0].args[1]["error"] == "FeatureError: snapshot sem enlaces"

    trainer.error = None
    assert await manager.on_drift(_event(200)) is True
    assert (await manager.finish_retrain()).version == 2
    assert manager.deployed.version == 2


async def test_completion_when_idle(weights_store, base_weights, small_graphs, mock_notifier):
    """Testa que conclusão sem retreino em andamento é recusada."""
    manager = await _manager(weights_store, base_weights, ControlledTrainer(base_weights), mock_notifier, small_graphs)
    with pytest.raises(SyncStateError):
        await manager.on_retrain_complete(base_weights.copy(version=2))


async def test_version_gap_rejected(weights_store, base_weights, small_graphs, mock_notifier):
    """Testa que uma versão fora de sequência não é implantada."""
    trainer = ControlledTrainer(base_weights, block=True)
    manager = await _manager(weights_store, base_weights, trainer, mock_notifier, small_graphs)
    await manager.on_drift(_event())
    with pytest.raises(SyncError):
        await manager.on_retrain_complete(base_weights.copy(version=5))
    assert manager.deployed.version == 1
    trainer.release.set()
    await manager.finish_retrain()
    assert manager.deployed.version == 2


async def test_archive_failure_keeps_retraining(base_weights, small_graphs, mock_notifier):
    """Testa que falha ao arquivar deixa o gerenciador em Retraining com os pesos antigos."""
    store = MagicMock(spec=WeightsStore)
    store.versions = AsyncMock(return_value=[])
    store.has_version = AsyncMock(return_value=False)
    store.save_weights = AsyncMock(side_effect=OSError("disco cheio"))
    manager = SyncManager(DeployedModel(base_weights), store, lambda: small_graphs, ControlledTrainer(base_weights), notifier=mock_notifier)
    await manager.start()
    await manager.on_drift(_event())
    with pytest.raises(SyncError):
        await manager.finish_retrain()
    assert manager.mode == SyncMode.retraining
    assert manager.deployed.version == 1
    assert "archive_failed" in _events(mock_notifier)


async def test_auto_complete(weights_store, base_weights, small_graphs, mock_notifier):
    """Testa a implantação automática ao fim do treino."""
    manager = await _manager(
        weights_store, base_weights, ControlledTrainer(base_weights), mock_notifier, small_graphs, auto_complete=True
    )
    await manager.on_drift(_event())
    await manager.finish_retrain()
    assert manager.deployed.version == 2
    assert manager.mode == SyncMode.idle
    assert manager.retrains == 1


async def test_rollback(weights_store, base_weights, small_graphs, mock_notifier):
    """Testa a volta para uma versão arquivada, arquivando a versão em serviço."""
    manager = await _manager(weights_store, base_weights, ControlledTrainer(base_weights), mock_notifier, small_graphs)
    await manager.on_drift(_event())
    await manager.finish_retrain()

    await manager.rollback(1)
    assert manager.deployed.current.same_as(base_weights)
    assert await weights_store.versions() == [1, 2]

    with pytest.raises(WeightsNotFoundError):
        await manager.rollback(9)

    await manager.on_drift(_event())
    assert (await manager.finish_retrain()).version == 3


async def test_rollback_refused_while_retraining(weights_store, base_weights, small_graphs, mock_notifier):
    """Testa que rollback é recusado com retreino em andamento."""
    trainer = ControlledTrainer(base_weights, block=True)
    manager = await _manager(weights_store, base_weights, trainer, mock_notifier, small_graphs)
    await manager.on_drift(_event())
    with pytest.raises(SyncStateError):
        await manager.rollback(1)
    trainer.release.set()
    await manager.finish_retrain()


async def test_predictions_consistent_during_swap(weights_store, base_weights, small_graphs, mock_notifier):
    """Testa que toda previsão concorrente vem inteira de uma única versão."""
    trainer = ControlledTrainer(base_weights, block=True)
    manager = await _manager(weights_store, base_weights, trainer, mock_notifier, small_graphs)
    graph = small_graphs[0]

    async def reader():
        results = []
        for _ in range(20):
            results.append(await asyncio.to_thread(manager.deployed.predict, graph))
        return results

    await manager.on_drift(_event())
    readers = [asyncio.create_task(reader()) for _ in range(4)]
    await asyncio.sleep(0)
    trainer.release.set()
    await manager.finish_retrain()
    results = [r for batch in await asyncio.gather(*readers) for r in batch]

    expected = {1: predict_delay(graph, base_weights), 2: predict_delay(graph, manager.deployed.current)}
    assert {r.version for r in results} <= {1, 2}
    for result in results:
        np.testing.assert_array_equal(result.y_hat, expected[result.version])


def test_fresh_trainer_versions(small_graphs):
    """Testa que o retreino parte de inicialização nova e produz a versão pedida."""
    reports = []
    trainer = fresh_trainer(
        TrainConfig(epochs=1, batch_size=2, validation_fraction=0.0),
        8,
        8,
        1,
        seed=3,
        on_epoch=lambda version, report: reports.append((version, report.epoch)),
    )
    a = trainer(small_graphs, 5)
    b = trainer(small_graphs, 5)
    assert a.weights.version == 5
    assert a.weights.same_as(b.weights)
    assert reports == [(5, 1), (5, 1)]
    assert a.weights.K == 1
