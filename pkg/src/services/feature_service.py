import logging
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.core.exceptions import FeatureError
from src.schemas.features import FlowFeatures, HeteroGraph, LabeledExample, LinkFeatures, ZScoreStats
from src.schemas.simulation import FlowOutcome, LinkOutcome, SimResult
from src.schemas.topology import TopologyGraph
from src.schemas.traffic import FlowSpec
from src.services.topology_service import path_prop_delay

logger = logging.getLogger(__name__)

ZSCORE_EPS = 1e-8


def flow_features(outcome: FlowOutcome, g: TopologyGraph) -> FlowFeatures:
    return FlowFeatures(
        avg_traffic_rate=outcome.avg_traffic_rate,
        path_prop_delay=path_prop_delay(g, list(outcome.path)),
        flow_length=len(outcome.path),
        avg_pkts_sent=outcome.avg_pkts_sent,
        avg_pkt_loss=outcome.avg_pkt_loss,
    )


def link_features(g: TopologyGraph, outcome: LinkOutcome) -> LinkFeatures:
    return LinkFeatures(capacity=g.link(outcome.link_id).capacity, load=outcome.load)


def _dual(paths: Sequence[Sequence[int]], link_count: int) -> Tuple[Tuple[int, ...], ...]:
    members: List[List[int]] = [[] for _ in range(link_count)]
    for t, path in enumerate(paths):
        for j in path:
            members[j].append(t)
    return tuple(tuple(m) for m in members)


def check_duality(graph: HeteroGraph) -> None:
    """t está em i do enlace l <=> l está em j do fluxo t."""
    from_paths = {(t, j) for t, path in enumerate(graph.paths) for j in path}
    from_links = {(t, j) for j, members in enumerate(graph.link_flows) for t in members}
    if from_paths != from_links:
        missing = sorted(from_paths.symmetric_difference(from_links))[:5]
        raise FeatureError(f"Dualidade de incidência violada nos pares (fluxo, enlace) {missing}")


def build_hypergraph(sim: SimResult, flows: Sequence[FlowSpec], g: TopologyGraph, with_labels: bool = True) -> HeteroGraph:
    """
    Monta o hipergrafo fluxo <-> enlace de um SimResult. Os índices locais de
    enlace coincidem com os link_ids da topologia.
    """
    if len(sim.flows) != len(flows) or any(o.flow_id != f.flow_id for o, f in zip(sim.flows, flows)):
        raise FeatureError("SimResult não cobre todos os fluxos informados")
    if len(sim.links) != g.link_count and sim.flows:
        raise FeatureError(f"SimResult com {len(sim.links)} enlaces para topologia com {g.link_count}")

    paths = tuple(o.path for o in sim.flows)
    link_flows = _dual(paths, g.link_count)
    for outcome in sim.links:
        if tuple(outcome.flows) != link_flows[outcome.link_id]:
            raise FeatureError(f"Dualidade de incidência violada no enlace {outcome.link_id}")

    flow_x = np.array([flow_features(o, g).to_vector() for o in sim.flows], dtype=np.float64).reshape(-1, 5)
    if sim.links:
        link_x = np.array([link_features(g, o).to_vector() for o in sim.links], dtype=np.float64)
    else:
        link_x = np.array([[g.link(j).capacity, 0.0] for j in range(g.link_count)], dtype=np.float64)
    graph = HeteroGraph(
        flow_features=flow_x,
        link_features=link_x,
        paths=paths,
        link_flows=link_flows,
        link_ids=tuple(range(g.link_count)),
        flow_ids=tuple(o.flow_id for o in sim.flows),
        labels=np.array(sim.labels, dtype=np.float64) if with_labels else None,
    )
    check_duality(graph)
    return graph


def labeled_examples(
    sim: SimResult, flows: Sequence[FlowSpec], g: TopologyGraph, snapshot_id: Optional[int] = None
) -> List[LabeledExample]:
    if len(sim.flows) != len(flows):
        raise FeatureError("SimResult não cobre todos os fluxos informados")
    link_ctx = {o.link_id: link_features(g, o) for o in sim.links}
    return [
        LabeledExample(
            flow_id=outcome.flow_id,
            snapshot_id=snapshot_id,
            flow_features=flow_features(outcome, g),
            path=outcome.path,
            link_context=tuple(link_ctx[j] for j in outcome.path),
            y=outcome.avg_delay,
        )
        for outcome in sim.flows
    ]


def hypergraph_from_inputs(
    flows: Sequence[Tuple[int, FlowFeatures, Sequence[int]]],
    link_context: Dict[int, LinkFeatures],
    labels: Optional[Sequence[float]] = None,
) -> HeteroGraph:
    """
    Hipergrafo a partir de (flow_id, features, caminho) e das features dos enlaces.
    Só os enlaces usados por algum fluxo aparecem, reindexados pela ordem do link_id.
    """
    if not flows:
        raise FeatureError("Conjunto de fluxos vazio")
    used = {j for _, _, path in flows for j in path}
    missing = sorted(used - set(link_context))
    if missing:
        raise FeatureError(f"Enlaces sem features: {missing[:5]}")
    link_ids = tuple(sorted(used))
    local = {j: index for index, j in enumerate(link_ids)}
    paths = tuple(tuple(local[j] for j in path) for _, _, path in flows)
    graph = HeteroGraph(
        flow_features=np.array([features.to_vector() for _, features, _ in flows], dtype=np.float64),
        link_features=np.array([link_context[j].to_vector() for j in link_ids], dtype=np.float64),
        paths=paths,
        link_flows=_dual(paths, len(link_ids)),
        link_ids=link_ids,
        flow_ids=tuple(flow_id for flow_id, _, _ in flows),
        labels=None if labels is None else np.array(labels, dtype=np.float64),
    )
    check_duality(graph)
    return graph


def hypergraph_from_examples(examples: Sequence[LabeledExample]) -> HeteroGraph:
    """Reconstrói o hipergrafo rotulado de um snapshot a partir dos exemplos."""
    if not examples:
        raise FeatureError("Conjunto de exemplos vazio")
    context: Dict[int, LinkFeatures] = {}
    for ex in examples:
        if len(ex.link_context) != len(ex.path):
            raise FeatureError(f"Fluxo {ex.flow_id}: contexto de enlaces não corresponde ao caminho")
        for j, features in zip(ex.path, ex.link_context):
            context.setdefault(j, features)
    return hypergraph_from_inputs(
        [(ex.flow_id, ex.flow_features, ex.path) for ex in examples],
        context,
        labels=[ex.y for ex in examples],
    )


def group_snapshots(examples: Iterable[LabeledExample]) -> List[HeteroGraph]:
    """Um hipergrafo por snapshot_id, na ordem da primeira ocorrência."""
    groups: Dict[Optional[int], List[LabeledExample]] = defaultdict(list)
    for ex in examples:
        groups[ex.snapshot_id].append(ex)
    return [hypergraph_from_examples(members) for members in groups.values()]


def disjoint_union(graphs: Sequence[HeteroGraph]) -> HeteroGraph:
    """União disjunta de hipergrafos, usada para montar lotes de snapshots."""
    if not graphs:
        raise FeatureError("Lote vazio")
    if len(graphs) == 1:
        return graphs[0]
    paths: List[Tuple[int, ...]] = []
    link_flows: List[Tuple[int, ...]] = []
    flow_offset = link_offset = 0
    for graph in graphs:
        paths.extend(tuple(j + link_offset for j in path) for path in graph.paths)
        link_flows.extend(tuple(t + flow_offset for t in members) for members in graph.link_flows)
        flow_offset += graph.flow_count
        link_offset += graph.link_count
    labels = None
    if all(graph.labels is not None for graph in graphs):
        labels = np.concatenate([graph.labels for graph in graphs])
    return HeteroGraph(
        flow_features=np.vstack([graph.flow_features for graph in graphs]),
        link_features=np.vstack([graph.link_features for graph in graphs]),
        paths=tuple(paths),
        link_flows=tuple(link_flows),
        link_ids=tuple(j for graph in graphs for j in graph.link_ids),
        flow_ids=tuple(t for graph in graphs for t in graph.flow_ids),
        labels=labels,
    )


def fit_columns(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Média e desvio padrão populacional por coluna."""
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise FeatureError(f"Ajuste de Z-score exige ao menos 2 exemplos (recebido {matrix.shape[0] if matrix.ndim else 0})")
    return matrix.mean(axis=0), matrix.std(axis=0)


def zscore_fit(graphs: Sequence[HeteroGraph]) -> ZScoreStats:
    if not graphs:
        raise FeatureError("Conjunto de exemplos vazio para o Z-score")
    flow_mean, flow_std = fit_columns(np.vstack([g.flow_features for g in graphs]))
    link_mean, link_std = fit_columns(np.vstack([g.link_features for g in graphs]))
    return ZScoreStats(
        flow_mean=tuple(float(v) for v in flow_mean),
        flow_std=tuple(float(v) for v in flow_std),
        link_mean=tuple(float(v) for v in link_mean),
        link_std=tuple(float(v) for v in link_std),
    )


def zscore_apply(stats: ZScoreStats, flow_x: np.ndarray, link_x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(x - média) / max(desvio, eps), por componente."""
    flow_mean, flow_std, link_mean, link_std = stats.as_arrays()
    if flow_x.shape[-1] != 5 or link_x.shape[-1] != 2:
        raise FeatureError(f"Dimensões de features inválidas: {flow_x.shape}, {link_x.shape}")
    return (
        (flow_x - flow_mean) / np.maximum(flow_std, ZSCORE_EPS),
        (link_x - link_mean) / np.maximum(link_std, ZSCORE_EPS),
    )


def zscore_invert(stats: ZScoreStats, flow_z: np.ndarray, link_z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    flow_mean, flow_std, link_mean, link_std = stats.as_arrays()
    return (
        flow_z * np.maximum(flow_std, ZSCORE_EPS) + flow_mean,
        link_z * np.maximum(link_std, ZSCORE_EPS) + link_mean,
    )
