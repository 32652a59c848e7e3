"""Gêmeo físico: simulador de eventos discretos com filas FIFO por enlace."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import simpy

from src.core.exceptions import RoutingError, SimulationError, TopologyError
from src.schemas.simulation import FlowOutcome, LinkOutcome, SimResult
from src.schemas.topology import LinkDef, TopologyGraph
from src.schemas.traffic import DistributionKind, FlowSpec
from src.services.feature_service import labeled_examples
from src.services.topology_service import path_hops
from src.services.traffic_service import draw, sample_packet_size

logger = logging.getLogger(__name__)


@dataclass
class Packet:
    flow_index: int
    size: int
    created: float
    hops: List[Tuple[int, int]]
    hop: int = 0


@dataclass
class _FlowCounters:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    bytes_sent: int = 0
    delay_sum: float = 0.0


class Port:
    """Fila FIFO com descarte na cauda de um sentido de um enlace."""

    def __init__(self, env: simpy.Environment, link: LinkDef, window: Tuple[float, float], network: "_Network"):
        self.env = env
        self.link = link
        self.window = window
        self.network = network
        self.queue = simpy.Store(env)
        self.occupancy = 0  # pacotes na fila + em transmissão
        self.offered = 0
        self.transmitted = 0
        self.dropped = 0
        self.busy_time = 0.0
        env.process(self.serve())

    def offer(self, packet: Packet) -> None:
        self.offered += 1
        if self.occupancy >= self.link.buffer:
            self.dropped += 1
            self.network.drop(packet)
            return
        self.occupancy += 1
        self.queue.put(packet)

    def serve(self):
        while True:
            packet = yield self.queue.get()
            tx = packet.size * 8.0 / self.link.capacity
            begin = self.env.now
            lo, hi = self.window
            self.busy_time += max(0.0, min(begin + tx, hi) - max(begin, lo))
            yield self.env.timeout(tx)
            self.occupancy -= 1
            self.transmitted += 1
            arrival = self.env.timeout(self.link.prop_delay)
            arrival.callbacks.append(lambda _event, p=packet: self.network.advance(p))


class _Network:
    def __init__(self, env: simpy.Environment, g: TopologyGraph, window: Tuple[float, float]):
        self.env = env
        self.ports: Dict[Tuple[int, int], Port] = {}
        for link in g.links:
            for direction in (0, 1):
                self.ports[(link.link_id, direction)] = Port(env, link, window, self)
        self.counters: List[_FlowCounters] = []

    def inject(self, packet: Packet) -> None:
        counters = self.counters[packet.flow_index]
        counters.sent += 1
        counters.bytes_sent += packet.size
        self.ports[packet.hops[0]].offer(packet)

    def advance(self, packet: Packet) -> None:
        packet.hop += 1
        if packet.hop == len(packet.hops):
            counters = self.counters[packet.flow_index]
            counters.delivered += 1
            counters.delay_sum += self.env.now - packet.created
            return
        self.ports[packet.hops[packet.hop]].offer(packet)

    def drop(self, packet: Packet) -> None:
        self.counters[packet.flow_index].dropped += 1


def _flow_source(env: simpy.Environment, net: _Network, index: int, flow: FlowSpec, hops, rng: np.random.Generator):
    # taxa sorteada uma vez por fluxo, com piso de um pacote na vida do fluxo
    rate = max(draw(flow.packet_rate, rng), 1.0 / flow.duration)
    constant_gap = flow.packet_rate.kind == DistributionKind.deterministic
    yield env.timeout(flow.start)
    while True:
        net.inject(Packet(flow_index=index, size=sample_packet_size(flow.packet_size, rng), created=env.now, hops=hops))
        gap = 1.0 / rate if constant_gap else float(rng.exponential(1.0 / rate))
        if env.now + gap >= flow.end:
            break
        yield env.timeout(gap)


def _saturated_delay(g: TopologyGraph, path: Sequence[int], mean_size: float) -> float:
    """Atraso de um pacote que encontra todos os buffers do caminho cheios."""
    total = 0.0
    for link_id in path:
        link = g.link(link_id)
        tx = mean_size * 8.0 / link.capacity
        total += link.buffer * tx + tx + link.prop_delay
    return total


def simulate(g: TopologyGraph, flows: Sequence[FlowSpec], rng: np.random.Generator) -> SimResult:
    """
    Executa a simulação de eventos discretos até esvaziar todas as filas.

    O atraso de cada pacote é a soma, sobre os enlaces do caminho, da espera na
    fila, da transmissão (tamanho*8/capacidade) e da propagação; y de um fluxo é
    a média sobre os pacotes entregues.
    """
    if not flows:
        return SimResult()

    try:
        routes = [path_hops(g, f.origin, f.destination) for f in flows]
    except (RoutingError, TopologyError) as e:
        raise SimulationError(f"Fluxo sem rota na topologia {g.name}: {e}") from e

    window = (min(f.start for f in flows), max(f.end for f in flows))
    env = simpy.Environment()
    net = _Network(env, g, window)
    base_seed = int(rng.integers(0, 2**63 - 1))
    for index, (flow, hops) in enumerate(zip(flows, routes)):
        net.counters.append(_FlowCounters())
        flow_rng = np.random.default_rng(np.random.SeedSequence([base_seed, flow.flow_id]))
        env.process(_flow_source(env, net, index, flow, hops, flow_rng))
    env.run()

    outcomes: List[FlowOutcome] = []
    incidence: Dict[int, List[int]] = {link.link_id: [] for link in g.links}
    for index, (flow, hops, counters) in enumerate(zip(flows, routes, net.counters)):
        path = tuple(link_id for link_id, _ in hops)
        for link_id in path:
            incidence[link_id].append(index)
        if counters.delivered:
            y = counters.delay_sum / counters.delivered
        else:
            mean_size = counters.bytes_sent / counters.sent if counters.sent else flow.packet_size.expected_value()
            y = _saturated_delay(g, path, mean_size)
            logger.warning("Fluxo %d sem pacotes entregues; rótulo pelo limite de buffer cheio", flow.flow_id)
        if counters.sent != counters.delivered + counters.dropped:
            raise SimulationError(f"Conservação violada no fluxo {flow.flow_id}")
        outcomes.append(
            FlowOutcome(
                flow_id=flow.flow_id,
                path=path,
                duration=flow.duration,
                sent=counters.sent,
                delivered=counters.delivered,
                dropped=counters.dropped,
                bytes_sent=counters.bytes_sent,
                avg_delay=y,
            )
        )

    span = window[1] - window[0]
    links: List[LinkOutcome] = []
    for link in g.links:
        directions = [net.ports[(link.link_id, d)] for d in (0, 1)]
        busiest = max(port.busy_time for port in directions)
        links.append(
            LinkOutcome(
                link_id=link.link_id,
                load=min(1.0, busiest / span) if span > 0 else 0.0,
                flows=tuple(incidence[link.link_id]),
                offered=sum(p.offered for p in directions),
                transmitted=sum(p.transmitted for p in directions),
                dropped=sum(p.dropped for p in directions),
            )
        )

    logger.debug(
        "Simulação concluída: %d fluxos, %d pacotes, %d descartes",
        len(outcomes),
        sum(o.sent for o in outcomes),
        sum(o.dropped for o in outcomes),
    )
    return SimResult(flows=outcomes, links=links, window=window)


def label_dataset(g: TopologyGraph, flows: Sequence[FlowSpec], rng: np.random.Generator, snapshot_id: Optional[int] = None):
    """
    Um exemplo rotulado por fluxo: (FlowFeatures, contexto de LinkFeatures do caminho, y).
    As features saem do mesmo SimResult que gera os rótulos.
    """
    sim = simulate(g, flows, rng)
    return labeled_examples(sim, flows, g, snapshot_id=snapshot_id)
