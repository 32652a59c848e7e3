import numpy as np
import pytest

from src.schemas.features import FlowFeatures, LinkFeatures
from src.services.feature_service import hypergraph_from_inputs, zscore_fit
from src.services.training_service import calibrate_occupancy_scale
from src.services.vtwin.model import init_weights


def random_inputs(rng, flows=5, links=6, max_len=3, first_flow_id=0):
    """Fluxos (id, features, caminho) sem enlaces repetidos e features de enlace plausíveis."""
    inputs = []
    for t in range(flows):
        length = int(rng.integers(1, max_len + 1))
        path = tuple(int(j) for j in rng.choice(links, size=length, replace=False))
        features = FlowFeatures(
            avg_traffic_rate=float(rng.uniform(1e4, 1e5)),
            path_prop_delay=float(length * rng.uniform(5e-4, 2e-3)),
            flow_length=length,
            avg_pkts_sent=float(rng.uniform(1, 20)),
            avg_pkt_loss=float(rng.uniform(0, 0.5)),
        )
        inputs.append((first_flow_id + t, features, path))
    context = {
        j: LinkFeatures(capacity=float(rng.choice([1e6, 2.5e6, 1e7])), load=float(rng.uniform(0, 1)))
        for j in range(links)
    }
    return inputs, context


def random_hypergraph(rng, flows=5, links=6, max_len=3, labels=True, first_flow_id=0):
    inputs, context = random_inputs(rng, flows, links, max_len, first_flow_id)
    y = rng.uniform(2e-3, 2e-2, size=flows) if labels else None
    return hypergraph_from_inputs(inputs, context, labels=y)


def fitted_weights(graphs, seed=0, m=8, n=8, K=2):
    """Pesos iniciais com normalização e escala de ocupação ajustadas em `graphs`."""
    w = init_weights(np.random.default_rng(seed), m=m, n=n, K=K)
    return w.copy(stats=zscore_fit(graphs), occupancy_scale=calibrate_occupancy_scale(graphs))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def small_graphs(rng):
    """Fixture com quatro snapshots pequenos rotulados."""
    return [random_hypergraph(rng, first_flow_id=10 * k) for k in range(4)]
