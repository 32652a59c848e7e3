import json
import logging
import math
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from src.core.config import settings
from src.core.exceptions import TrafficError
from src.schemas.topology import TopologyGraph
from src.schemas.traffic import DistributionKind, DistributionSpec, FlowSpec, ScenarioSchedule, TrafficPhase
from src.services.topology_service import shortest_path
from src.validators import parse_schedule_ref

logger = logging.getLogger(__name__)


def draw(spec: DistributionSpec, rng: np.random.Generator) -> float:
    """Uma amostra contínua (ou inteira, para Poisson) da distribuição."""
    if spec.kind == DistributionKind.uniform:
        return float(rng.uniform(spec.low, spec.high))
    if spec.kind == DistributionKind.exponential:
        return float(rng.exponential(spec.mean))
    if spec.kind == DistributionKind.poisson:
        return float(rng.poisson(spec.mean))
    return float(spec.value)


def sample_packet_size(spec: DistributionSpec, rng: np.random.Generator) -> int:
    """Tamanho de pacote em bytes: arredondado para cima, nunca menor que 1."""
    return max(1, int(math.ceil(draw(spec, rng))))


def default_drift_schedule(total_time: float, rate_scale: Optional[float] = None) -> ScenarioSchedule:
    """
    Sequência E -> P -> U -> K em quatro fases de mesma duração.

    As taxas de pacotes usam a mesma família e parâmetros do tamanho de pacote,
    multiplicados por `rate_scale` (pacotes/s). Só a última fase tem congestionamento.
    """
    if total_time <= 0:
        raise TrafficError(f"Duração total do cronograma deve ser positiva, recebido {total_time}")
    scale = settings.RATE_SCALE if rate_scale is None else rate_scale
    sizes = [
        ("E", DistributionSpec.exponential(1024)),
        ("P", DistributionSpec.poisson(2048)),
        ("U", DistributionSpec.uniform(512, 1024)),
        ("K", DistributionSpec.deterministic(512)),
    ]
    duration = total_time / len(sizes)
    phases = [
        TrafficPhase(
            label=label,
            packet_size=size,
            packet_rate=size.scaled(scale),
            duration=duration,
            congestion=index == len(sizes) - 1,
        )
        for index, (label, size) in enumerate(sizes)
    ]
    return ScenarioSchedule(phases=tuple(phases))


def load_schedule(path: str | Path) -> ScenarioSchedule:
    path = Path(path)
    if not path.exists():
        raise TrafficError(f"Arquivo de cronograma não encontrado: {path}")
    try:
        return ScenarioSchedule.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise TrafficError(f"Erro de parse em {path}: {e}") from e
    except ValidationError as e:
        details = "; ".join(err["msg"] for err in e.errors())
        raise TrafficError(f"Cronograma inválido em {path}: {details}") from e


def resolve_schedule(ref: str) -> ScenarioSchedule:
    """Interpreta `default:<segundos>` ou o caminho de um arquivo de cronograma."""
    total = parse_schedule_ref(ref)
    if total is not None:
        return default_drift_schedule(total)
    return load_schedule(ref)


def _od_pairs(g: TopologyGraph) -> list[tuple[int, int]]:
    nodes = sorted(g.nodes)
    return [(o, d) for o in nodes for d in nodes if o != d]


def congestion_factor(
    g: TopologyGraph,
    phase: TrafficPhase,
    flows_per_second: float,
    flow_duration: float,
    target_load: Optional[float] = None,
) -> float:
    """
    Fator que multiplica a taxa de pacotes de uma fase congestionada para que a
    carga esperada no enlace mais carregado chegue a `target_load` vezes a capacidade.
    Nunca menor que 1.
    """
    target = settings.CONGESTION_LOAD if target_load is None else target_load
    pairs = _od_pairs(g)
    # fração dos pares O-D que cruzam cada enlace
    share = np.zeros(g.link_count)
    for origin, destination in pairs:
        for link_id in shortest_path(g, origin, destination):
            share[link_id] += 1.0
    share /= len(pairs)

    concurrent = flows_per_second * flow_duration
    per_flow_bps = phase.packet_size.expected_value() * 8.0 * phase.packet_rate.expected_value()
    capacities = np.array([g.link(j).capacity for j in range(g.link_count)])
    utilisation = concurrent * share * per_flow_bps / capacities
    bottleneck = float(utilisation.max())
    if bottleneck <= 0:
        return 1.0
    return max(1.0, target / bottleneck)


def generate_flows(
    g: TopologyGraph,
    sched: ScenarioSchedule,
    flows_per_second: float,
    rng: np.random.Generator,
    flow_duration: Optional[float] = None,
    start_offset: float = 0.0,
    first_flow_id: int = 0,
) -> List[FlowSpec]:
    """
    Gera os fluxos do cronograma, ordenados por início.

    Os inícios são espaçados de 1/flows_per_second a partir de `start_offset`; o par
    (O, D) é sorteado uniformemente entre os pares distintos e as distribuições vêm
    da fase que contém o início do fluxo.
    """
    if flows_per_second <= 0:
        raise TrafficError(f"flows_per_second deve ser positivo, recebido {flows_per_second}")
    if not sched.phases:
        raise TrafficError("Cronograma vazio")
    duration = settings.FLOW_DURATION_S if flow_duration is None else flow_duration

    pairs = _od_pairs(g)
    rate_specs = []
    for phase in sched.phases:
        if phase.congestion:
            factor = congestion_factor(g, phase, flows_per_second, duration)
            logger.info("Fase %s congestionada: taxa de pacotes x%.3f", phase.label or "?", factor)
            rate_specs.append(phase.packet_rate.scaled(factor))
        else:
            rate_specs.append(phase.packet_rate)

    count = int(math.floor(sched.total_duration * flows_per_second + 1e-9))
    picks = rng.integers(0, len(pairs), size=count)
    flows: List[FlowSpec] = []
    for k in range(count):
        start = k / flows_per_second
        index = sched.phase_at(start)
        origin, destination = pairs[int(picks[k])]
        flows.append(
            FlowSpec(
                flow_id=first_flow_id + k,
                origin=origin,
                destination=destination,
                start=start_offset + start,
                duration=duration,
                packet_size=sched.phases[index].packet_size,
                packet_rate=rate_specs[index],
                phase=index,
            )
        )
    logger.debug("%d fluxos gerados em %d fases", len(flows), len(sched.phases))
    return flows


def single_phase(schedule: ScenarioSchedule, index: int, duration: Optional[float] = None) -> ScenarioSchedule:
    """Cronograma de uma fase só, usado para montar os datasets rotulados de cada padrão."""
    phase = schedule.phases[index]
    if duration is not None:
        phase = phase.model_copy(update={"duration": duration})
    return ScenarioSchedule(phases=(phase,))
