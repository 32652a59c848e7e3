import numpy as np
import pytest

from src.core.exceptions import SimulationError
from src.schemas.traffic import DistributionSpec, FlowSpec
from src.services.ptwin_service import label_dataset, simulate
from src.services.topology_service import load_topology, parse_topology
from src.services.traffic_service import default_drift_schedule, generate_flows


@pytest.fixture
def single_link():
    """Fixture com um único enlace de 1 Mb/s e 1 ms de propagação."""
    return parse_topology(
        {
            "name": "single",
            "nodes": [0, 1],
            "links": [{"id": 0, "src": 0, "dst": 1, "capacity_bps": 1e6, "prop_delay_s": 0.001}],
        }
    )


def _flow(flow_id, rate, duration=5.0, start=0.0, size=512):
    return FlowSpec(
        flow_id=flow_id,
        origin=0,
        destination=1,
        start=start,
        duration=duration,
        packet_size=DistributionSpec.deterministic(size),
        packet_rate=DistributionSpec.deterministic(rate),
    )


def test_uncontended_delay(single_link):
    """Testa o atraso analítico sem disputa: transmissão + propagação."""
    sim = simulate(single_link, [_flow(0, 1.0)], np.random.default_rng(0))
    outcome = sim.flows[0]
    assert outcome.sent == 5
    assert outcome.delivered == 5
    assert outcome.dropped == 0
    assert outcome.avg_delay == pytest.approx(512 * 8 / 1e6 + 0.001, abs=1e-12)
    assert outcome.avg_delay == pytest.approx(0.005096, abs=1e-12)


def test_empty_flow_set(single_link):
    """Testa que nenhum fluxo produz um resultado vazio."""
    sim = simulate(single_link, [], np.random.default_rng(0))
    assert sim.is_empty
    assert sim.links == []


def test_overload_drops_packets(single_link):
    """Testa perda e carga saturada com demanda de 1,5x a capacidade."""
    rate = 1.5e6 / (2 * 512 * 8)
    flows = [_flow(0, rate, duration=10.0), _flow(1, rate, duration=10.0)]
    sim = simulate(single_link, flows, np.random.default_rng(0))
    assert sum(o.dropped for o in sim.flows) > 0
    assert sim.links[0].load == pytest.approx(1.0, abs=1e-6)
    queued = [o.avg_delay for o in sim.flows]
    assert min(queued) > 0.005096


def test_conservation():
    """Testa enviados = entregues + descartados por fluxo e por enlace."""
    g = load_topology("data/topologies/synthetic8.json")
    flows = generate_flows(g, default_drift_schedule(8), 2.0, np.random.default_rng(3), flow_duration=2.0)
    sim = simulate(g, flows, np.random.default_rng(4))
    assert len(sim.flows) == len(flows)
    for outcome in sim.flows:
        assert outcome.sent == outcome.delivered + outcome.dropped
        assert outcome.avg_delay > 0
    for link in sim.links:
        assert link.offered == link.transmitted + link.dropped
        assert 0.0 <= link.load <= 1.0


def test_simulation_deterministic():
    """Testa que a mesma semente reproduz os rótulos."""
    g = load_topology("data/topologies/synthetic8.json")
    flows = generate_flows(g, default_drift_schedule(8), 2.0, np.random.default_rng(3), flow_duration=2.0)
    a = simulate(g, flows, np.random.default_rng(11))
    b = simulate(g, flows, np.random.default_rng(11))
    assert a.labels == b.labels
    assert [l.load for l in a.links] == [l.load for l in b.links]


def test_unroutable_flow():
    """Testa o erro para fluxo sem rota."""
    g = parse_topology(
        {
            "name": "split",
            "nodes": [0, 1, 2],
            "links": [{"id": 0, "src": 0, "dst": 1, "capacity_bps": 1e6, "prop_delay_s": 0.001}],
        }
    )
    flow = FlowSpec(
        flow_id=0,
        origin=0,
        destination=2,
        start=0.0,
        duration=1.0,
        packet_size=DistributionSpec.deterministic(512),
        packet_rate=DistributionSpec.deterministic(1),
    )
    with pytest.raises(SimulationError):
        simulate(g, [flow], np.random.default_rng(0))


def test_label_dataset(single_link):
    """Testa que os exemplos rotulados carregam features e rótulo do mesmo resultado."""
    examples = label_dataset(single_link, [_flow(7, 1.0)], np.random.default_rng(0), snapshot_id=3)
    assert len(examples) == 1
    ex = examples[0]
    assert ex.flow_id == 7
    assert ex.snapshot_id == 3
    assert ex.path == (0,)
    assert ex.flow_features.flow_length == 1
    assert ex.flow_features.avg_pkts_sent == pytest.approx(1.0)
    assert ex.flow_features.avg_traffic_rate == pytest.approx(5 * 512 * 8 / 5.0)
    assert ex.flow_features.path_prop_delay == pytest.approx(0.001)
    assert ex.link_context[0].capacity == 1e6
    assert ex.y == pytest.approx(0.005096, abs=1e-12)
