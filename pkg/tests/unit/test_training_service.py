import dataclasses
import math

import numpy as np
import pytest

from src.core.exceptions import ModelError, TrainingDivergedError
from src.schemas.training import TrainConfig
from src.services.feature_service import hypergraph_from_inputs
from src.services.training_service import Adam, batch_loss, gradient_check, mape, train
from src.services.vtwin import predict_delay
from tests.conftest import fitted_weights, random_hypergraph, random_inputs


def learnable_graphs(rng, count=8):
    """Snapshots cujo rótulo depende da carga dos enlaces do caminho."""
    graphs = []
    for k in range(count):
        inputs, context = random_inputs(rng, flows=6, first_flow_id=10 * k)
        y = [sum(2e-3 + 1e-2 * context[j].load for j in path) for _, _, path in inputs]
        graphs.append(hypergraph_from_inputs(inputs, context, labels=y))
    return graphs


@pytest.mark.parametrize(
    "y, y_hat, expected",
    [
        ([3.0, 4.0], [3.0, 4.0], 0.0),
        ([2.0], [1.0], 50.0),
        ([1.0, 2.0], [1.1, 1.8], 10.0),
    ],
)
def test_mape(y, y_hat, expected):
    """Testa o MAPE em exemplos diretos."""
    assert mape(y, y_hat) == pytest.approx(expected)


def test_mape_floor():
    """Testa que rótulos quase nulos são limitados pelo piso."""
    assert mape([0.0], [1e-6]) == pytest.approx(100.0)


def test_mape_invalid():
    """Testa o erro para vetores vazios ou desalinhados."""
    with pytest.raises(ModelError):
        mape([], [])
    with pytest.raises(ModelError):
        mape([1.0, 2.0], [1.0])


def test_batch_loss_matches_mape(small_graphs):
    """Testa que a perda de um snapshot é o MAPE das previsões."""
    w = fitted_weights(small_graphs)
    graph = small_graphs[0]
    assert batch_loss([graph], w).value == pytest.approx(mape(graph.labels, predict_delay(graph, w)), rel=1e-12)


def test_zero_epochs(small_graphs):
    """Testa que 0 épocas só incrementa a versão."""
    w0 = fitted_weights(small_graphs).copy(version=3)
    result = train(w0, small_graphs, TrainConfig(epochs=0, validation_fraction=0.0))
    assert result.weights.version == 4
    assert result.history == []
    for name, value in w0.params.items():
        np.testing.assert_array_equal(result.weights.params[name], value)


def test_train_does_not_mutate_input(small_graphs):
    """Testa que o treino trabalha sobre uma cópia dos pesos."""
    w0 = fitted_weights(small_graphs)
    before = w0.copy()
    train(w0, small_graphs, TrainConfig(epochs=2, batch_size=2, validation_fraction=0.0))
    assert w0.same_as(before)


def test_train_deterministic(small_graphs):
    """Testa que mesma semente e mesmos dados geram pesos idênticos."""
    cfg = TrainConfig(epochs=3, batch_size=2, learning_rate=0.01, seed=5)
    w0 = fitted_weights(small_graphs)
    a = train(w0, small_graphs, cfg)
    b = train(w0, small_graphs, cfg)
    assert a.weights.same_as(b.weights)
    assert a.history == b.history


def test_train_converges():
    """Testa que a perda da última época fica abaixo da primeira."""
    rng = np.random.default_rng(77)
    graphs = learnable_graphs(rng)
    w0 = fitted_weights(graphs, seed=1)
    reports = []
    cfg = TrainConfig(epochs=15, batch_size=2, learning_rate=0.01, seed=1, validation_fraction=0.25)
    result = train(w0, graphs, cfg, on_epoch=reports.append)
    assert len(result.history) == 15
    assert all(math.isfinite(v) for v in result.history)
    assert result.history[-1] < result.history[0]
    assert [r.epoch for r in reports] == list(range(1, 16))
    assert result.train_snapshots == 6
    assert result.validation_snapshots == 2
    assert result.validation_mape is not None


def test_train_fits_normalization(small_graphs):
    """Testa que pesos sem normalização recebem Z-score e escala no treino."""
    w0 = fitted_weights(small_graphs)
    bare = w0.copy(stats=None, occupancy_scale=1.0)
    result = train(bare, small_graphs, TrainConfig(epochs=0, validation_fraction=0.0))
    assert result.weights.stats is not None
    assert result.weights.occupancy_scale != 1.0


def test_train_without_data(small_graphs):
    """Testa o erro para conjunto de treino vazio."""
    with pytest.raises(ModelError):
        train(fitted_weights(small_graphs), [], TrainConfig(epochs=1))


def test_train_diverges(small_graphs):
    """Testa que perda não finita interrompe o treino com os últimos pesos."""
    w0 = fitted_weights(small_graphs)
    w0.params["readout.b3"][0] = np.nan
    with pytest.raises(TrainingDivergedError) as exc:
        train(w0, small_graphs, TrainConfig(epochs=2, validation_fraction=0.0))
    assert exc.value.weights is not None
    assert exc.value.history == []


def test_adam_zero_gradient(small_graphs):
    """Testa que um passo do Adam com gradiente nulo não altera os parâmetros."""
    w = fitted_weights(small_graphs)
    params = {name: value.copy() for name, value in w.params.items()}
    Adam(params, TrainConfig()).step(params, {name: np.zeros_like(v) for name, v in params.items()})
    for name, value in w.params.items():
        np.testing.assert_array_equal(params[name], value)


@pytest.fixture
def check_batch(rng):
    graphs = [random_hypergraph(rng, flows=5, links=6) for _ in range(3)]
    return graphs, fitted_weights(graphs, seed=4, m=8, n=8, K=2)


def test_gradient_check_full_model(check_batch):
    """Testa o gradiente analítico contra diferenças finitas no modelo completo."""
    graphs, w = check_batch
    error = gradient_check(w, graphs[:2], h=1e-5, samples=200, rng=np.random.default_rng(1), floor=1e-3)
    assert error < 1e-4


def _overshooting(graph, w):
    """Rótulos em metade da previsão: o sinal do erro é o mesmo em todos os fluxos."""
    return dataclasses.replace(graph, labels=0.5 * predict_delay(graph, w))


def test_gradient_check_readout_bias(check_batch):
    """Testa erro relativo desprezível no viés final, sem passagem de mensagens."""
    graphs, w = check_batch
    w = w.copy(K=0)
    batch = [_overshooting(g, w) for g in graphs]
    assert gradient_check(w, batch, h=1e-5, params=["readout.b3"]) < 1e-8


def test_gradient_check_truncation_trend(check_batch):
    """Testa que o erro cresce com o passo das diferenças finitas."""
    graphs, w = check_batch
    w = w.copy(K=0)
    w.params["readout.b3"][0] = 1.0
    batch = [_overshooting(g, w) for g in graphs]
    coarse = gradient_check(w, batch, h=1e-1, params=["readout.b3"])
    fine = gradient_check(w, batch, h=1e-5, params=["readout.b3"])
    assert coarse > 10 * fine


def test_gradient_check_empty_batch(check_batch):
    """Testa o erro para lote vazio."""
    with pytest.raises(ModelError):
        gradient_check(check_batch[1], [])
