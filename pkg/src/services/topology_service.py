import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import List, Tuple

import networkx as nx
from pydantic import ValidationError

from src.core.exceptions import RoutingError, TopologyError
from src.schemas.topology import TopologyGraph

logger = logging.getLogger(__name__)

# (link_id, direção): 0 quando percorrido src->dst, 1 no sentido contrário
Hop = Tuple[int, int]


def load_topology(path: str | Path) -> TopologyGraph:
    """
    Carrega e valida um arquivo de topologia (JSON com `name`, `nodes` e `links`).

    Raises:
        TopologyError: arquivo inexistente, JSON inválido ou invariantes violadas
            (nó desconhecido, id duplicado, laço). A mensagem nomeia a entidade.
    """
    path = Path(path)
    if not path.exists():
        raise TopologyError(f"Arquivo de topologia não encontrado: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise TopologyError(f"Erro de parse em {path}: {e}") from e
    graph = parse_topology(raw)
    logger.info("Topologia %s carregada: %d nós, %d enlaces", graph.name, graph.node_count, graph.link_count)
    return graph


def parse_topology(raw: dict) -> TopologyGraph:
    try:
        return TopologyGraph.model_validate(raw)
    except ValidationError as e:
        details = "; ".join(err["msg"] for err in e.errors())
        raise TopologyError(f"Topologia inválida: {details}") from e


def serialize_topology(g: TopologyGraph) -> str:
    return json.dumps(g.model_dump(by_alias=True, mode="json"), indent=2)


def save_topology(g: TopologyGraph, path: str | Path) -> None:
    Path(path).write_text(serialize_topology(g), encoding="utf-8")


@lru_cache(maxsize=32)
def to_networkx(g: TopologyGraph) -> nx.Graph:
    """Grafo não direcionado; enlaces paralelos colapsam no menor link_id."""
    graph = nx.Graph()
    graph.add_nodes_from(g.nodes)
    for link in sorted(g.links, key=lambda l: l.link_id):
        if not graph.has_edge(link.src, link.dst):
            graph.add_edge(link.src, link.dst, link_id=link.link_id)
    return graph


@lru_cache(maxsize=32)
def _hop_distances(g: TopologyGraph, destination: int) -> dict:
    return nx.single_source_shortest_path_length(to_networkx(g), destination)


def path_hops(g: TopologyGraph, origin: int, destination: int) -> List[Hop]:
    """
    Caminho de menor número de saltos de O para D, com desempate pelo menor
    id do próximo nó. Retorna pares (link_id, direção) na ordem do caminho.
    """
    if origin == destination:
        raise RoutingError(f"Origem e destino iguais ({origin})")
    declared = set(g.nodes)
    for node in (origin, destination):
        if node not in declared:
            raise TopologyError(f"Nó desconhecido {node} na topologia {g.name}")

    graph = to_networkx(g)
    dist = _hop_distances(g, destination)
    if origin not in dist:
        raise RoutingError(f"Destino {destination} inalcançável a partir de {origin}")

    hops: List[Hop] = []
    node = origin
    while node != destination:
        next_node = min(v for v in graph.neighbors(node) if dist.get(v) == dist[node] - 1)
        link_id = graph.edges[node, next_node]["link_id"]
        direction = 0 if g.link(link_id).src == node else 1
        hops.append((link_id, direction))
        node = next_node
    return hops


def shortest_path(g: TopologyGraph, origin: int, destination: int) -> List[int]:
    """Vetor j de índices de enlace percorridos pelo fluxo O -> D."""
    return [link_id for link_id, _ in path_hops(g, origin, destination)]


def path_prop_delay(g: TopologyGraph, path: List[int]) -> float:
    links = g.links_by_id
    return float(sum(links[j].prop_delay for j in path))
