"""
Gêmeo virtual: rede de passagem de mensagens heterogênea fluxo <-> enlace.

Fluxo do modelo:
    1. embed: MLPs de uma camada oculta levam x_f e x_e a h_f (m) e h_e (n);
    2. message_pass: K iterações de
       - atualização de fluxo: GRU percorre os h_e do caminho, na ordem, a partir de h_f;
       - atualização de enlace: atenção sobre os fluxos incidentes, soma ponderada
         das mensagens e um passo de GRU;
    3. readout: MLP (32, 16, 1) com softplus dá a ocupação O_j de cada enlace e
       y_t = soma de O_j / c_j sobre o caminho do fluxo t.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from src.core.exceptions import ModelError
from src.schemas.features import HeteroGraph
from src.schemas.vtwin import ATTENTION_DIM, EMBED_HIDDEN, READOUT_HIDDEN, ModelWeights
from src.services.feature_service import zscore_apply
from src.services.vtwin.autograd import (
    SegmentLayout,
    Tensor,
    columns,
    relu,
    reshape,
    segment_softmax,
    segment_sum,
    sigmoid,
    softplus,
    take,
    tanh,
    total,
)

logger = logging.getLogger(__name__)

FLOW_DIM = 5
LINK_DIM = 2


def param_shapes(m: int, n: int) -> Dict[str, Tuple[int, ...]]:
    """Tabela ordenada de parâmetros (nome -> forma)."""
    h1, h2 = READOUT_HIDDEN
    return {
        "flow_embed.w1": (FLOW_DIM, EMBED_HIDDEN),
        "flow_embed.b1": (EMBED_HIDDEN,),
        "flow_embed.w2": (EMBED_HIDDEN, m),
        "flow_embed.b2": (m,),
        "link_embed.w1": (LINK_DIM, EMBED_HIDDEN),
        "link_embed.b1": (EMBED_HIDDEN,),
        "link_embed.w2": (EMBED_HIDDEN, n),
        "link_embed.b2": (n,),
        "flow_gru.w": (n, 3 * m),
        "flow_gru.u": (m, 3 * m),
        "flow_gru.b": (3 * m,),
        "link_gru.w": (m, 3 * n),
        "link_gru.u": (n, 3 * n),
        "link_gru.b": (3 * n,),
        "attention.wq": (n, ATTENTION_DIM),
        "attention.wk": (m, ATTENTION_DIM),
        "readout.w1": (n, h1),
        "readout.b1": (h1,),
        "readout.w2": (h1, h2),
        "readout.b2": (h2,),
        "readout.w3": (h2, 1),
        "readout.b3": (1,),
    }


def init_weights(rng: np.random.Generator, m: int = 16, n: int = 16, K: int = 12) -> ModelWeights:
    """Pesos uniformes em +-sqrt(6/(fan_in+fan_out)); vieses zerados."""
    if m <= 0 or n <= 0 or K < 0:
        raise ModelError(f"Hiperparâmetros inválidos: m={m}, n={n}, K={K}")
    params: Dict[str, np.ndarray] = {}
    for name, shape in param_shapes(m, n).items():
        if len(shape) == 1:
            params[name] = np.zeros(shape, dtype=np.float64)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
    return ModelWeights(params=params, m=m, n=n, K=K)


def as_tensors(w: ModelWeights) -> Dict[str, Tensor]:
    return {name: Tensor(value, name=name) for name, value in w.params.items()}


def _check_params(w: ModelWeights) -> None:
    expected = param_shapes(w.m, w.n)
    if list(expected) != list(w.params):
        raise ModelError("Conjunto de parâmetros não corresponde à arquitetura")
    for name, shape in expected.items():
        if w.params[name].shape != shape:
            raise ModelError(f"Parâmetro {name} com forma {w.params[name].shape}, esperado {shape}")


@dataclass
class EmbeddingState:
    h_f: Tensor  # T x m
    h_e: Tensor  # L x n
    k: int = 0


@dataclass
class GraphLayout:
    """Índices pré-computados de um hipergrafo para o forward."""

    path_index: np.ndarray
    path_mask: np.ndarray
    pair_flows: np.ndarray
    pair_links: np.ndarray
    link_segments: SegmentLayout
    link_active: np.ndarray
    hop_flows: np.ndarray
    hop_links: np.ndarray
    flow_segments: SegmentLayout

    @classmethod
    def of(cls, graph: HeteroGraph) -> "GraphLayout":
        path_index, path_mask = graph.padded_paths
        pair_flows, pair_links = graph.incidence_pairs
        hop_flows, hop_links = graph.path_incidence
        degree = np.array([len(m) for m in graph.link_flows], dtype=np.float64).reshape(-1, 1)
        return cls(
            path_index=path_index,
            path_mask=path_mask,
            pair_flows=pair_flows,
            pair_links=pair_links,
            link_segments=SegmentLayout(pair_links, graph.link_count),
            link_active=(degree > 0).astype(np.float64),
            hop_flows=hop_flows,
            hop_links=hop_links,
            flow_segments=SegmentLayout(hop_flows, graph.flow_count),
        )


def _mlp(x: Tensor, p: Dict[str, Tensor], prefix: str, layers: int) -> Tensor:
    h = x
    for i in range(1, layers + 1):
        h = h @ p[f"{prefix}.w{i}"] + p[f"{prefix}.b{i}"]
        if i < layers:
            h = relu(h)
    return h


def gru_cell(x: Tensor, h: Tensor, w: Tensor, u: Tensor, b: Tensor, size: int) -> Tensor:
    """GRU clássica: z e r por sigmoide, candidato por tanh sobre r*h."""
    gx = x @ w + b
    gh = h @ columns(u, 0, 2 * size)
    z = sigmoid(columns(gx, 0, size) + columns(gh, 0, size))
    r = sigmoid(columns(gx, size, 2 * size) + columns(gh, size, 2 * size))
    candidate = tanh(columns(gx, 2 * size, 3 * size) + (r * h) @ columns(u, 2 * size, 3 * size))
    return h + z * (candidate - h)


def normalized_inputs(graph: HeteroGraph, w: ModelWeights) -> Tuple[np.ndarray, np.ndarray]:
    if graph.flow_features.shape[1:] != (FLOW_DIM,) or graph.link_features.shape[1:] != (LINK_DIM,):
        raise ModelError(f"Dimensões de entrada inválidas: {graph.flow_features.shape}, {graph.link_features.shape}")
    if w.stats is None:
        return graph.flow_features, graph.link_features
    return zscore_apply(w.stats, graph.flow_features, graph.link_features)


def embed(flow_x: np.ndarray, link_x: np.ndarray, w: ModelWeights, p: Optional[Dict[str, Tensor]] = None) -> EmbeddingState:
    """h_f = MLP(x_f; theta_f) e h_e = MLP(x_e; theta_e), com k = 0."""
    p = p or as_tensors(w)
    if flow_x.shape[-1] != FLOW_DIM or link_x.shape[-1] != LINK_DIM:
        raise ModelError(f"Dimensões de entrada inválidas: {flow_x.shape}, {link_x.shape}")
    h_f = _mlp(Tensor(flow_x.reshape(-1, FLOW_DIM)), p, "flow_embed", 2)
    h_e = _mlp(Tensor(link_x.reshape(-1, LINK_DIM)), p, "link_embed", 2)
    return EmbeddingState(h_f=h_f, h_e=h_e, k=0)


def _attention_logits(h_e: Tensor, h_f: Tensor, layout: GraphLayout, p: Dict[str, Tensor]) -> Tensor:
    query = take(h_e @ p["attention.wq"], layout.pair_links)
    key = take(h_f @ p["attention.wk"], layout.pair_flows)
    return total(query * key, axis=1) * (1.0 / np.sqrt(ATTENTION_DIM))


def attention_weights(state: EmbeddingState, layout: GraphLayout, p: Dict[str, Tensor]) -> Tensor:
    """Pesos de atenção por par (fluxo, enlace); somam 1 em cada vizinhança."""
    return segment_softmax(_attention_logits(state.h_e, state.h_f, layout, p), layout.link_segments)


def attention_score(h_e: np.ndarray, h_p_set: np.ndarray, w: ModelWeights) -> np.ndarray:
    """Atenção de um enlace sobre o conjunto de estados dos fluxos vizinhos."""
    h_p_set = np.atleast_2d(h_p_set)
    if h_p_set.shape[0] < 1:
        raise ModelError("Vizinhança vazia")
    p = as_tensors(w)
    count = h_p_set.shape[0]
    layout = SegmentLayout(np.zeros(count, dtype=np.int64), 1)
    query = Tensor(np.repeat(np.atleast_2d(h_e), count, axis=0)) @ p["attention.wq"]
    key = Tensor(h_p_set) @ p["attention.wk"]
    logits = total(query * key, axis=1) * (1.0 / np.sqrt(ATTENTION_DIM))
    return segment_softmax(logits, layout).value


def message_pass(
    state: EmbeddingState, graph: HeteroGraph, w: ModelWeights, p: Optional[Dict[str, Tensor]] = None,
    layout: Optional[GraphLayout] = None, iterations: Optional[int] = None,
) -> EmbeddingState:
    p = p or as_tensors(w)
    layout = layout or GraphLayout.of(graph)
    steps = w.K if iterations is None else iterations
    h_f, h_e = state.h_f, state.h_e
    m, n = w.m, w.n
    for _ in range(steps):
        # fluxos: GRU ao longo do caminho
        for position in range(layout.path_index.shape[1]):
            mask = layout.path_mask[:, position : position + 1]
            if not mask.any():
                continue
            x = take(h_e, layout.path_index[:, position])
            stepped = gru_cell(x, h_f, p["flow_gru.w"], p["flow_gru.u"], p["flow_gru.b"], m)
            h_f = h_f + (stepped - h_f) * mask
        # enlaces: atenção sobre os fluxos incidentes e passo de GRU
        if layout.pair_links.size:
            alpha = segment_softmax(_attention_logits(h_e, h_f, layout, p), layout.link_segments)
            messages = take(h_f, layout.pair_flows) * reshape(alpha, (-1, 1))
            aggregate = segment_sum(messages, layout.link_segments)
            stepped = gru_cell(aggregate, h_e, p["link_gru.w"], p["link_gru.u"], p["link_gru.b"], n)
            h_e = h_e + (stepped - h_e) * layout.link_active
    return EmbeddingState(h_f=h_f, h_e=h_e, k=state.k + steps)


def occupancy(h_e: Tensor, w: ModelWeights, p: Dict[str, Tensor]) -> Tensor:
    """O_j = escala * softplus(MLP(h_e)) por enlace."""
    raw = _mlp(h_e, p, "readout", 3)
    return reshape(softplus(raw), (-1,)) * w.occupancy_scale


def forward(graph: HeteroGraph, w: ModelWeights, p: Optional[Dict[str, Tensor]] = None) -> Tensor:
    """Predição diferenciável y_t (T) para o hipergrafo."""
    p = p or as_tensors(w)
    flow_x, link_x = normalized_inputs(graph, w)
    layout = GraphLayout.of(graph)
    state = message_pass(embed(flow_x, link_x, w, p), graph, w, p, layout)
    terms = occupancy(state.h_e, w, p) / Tensor(graph.capacities)
    return segment_sum(take(terms, layout.hop_links), layout.flow_segments)


def predict_delay(graph: HeteroGraph, w: ModelWeights) -> np.ndarray:
    """y_t = soma, no caminho de t, de O_j / c_j. Sempre >= 0."""
    _check_params(w)
    if graph.flow_count == 0:
        return np.zeros(0, dtype=np.float64)
    return forward(graph, w).value
