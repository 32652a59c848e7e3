from typing import Dict, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from src.core.config import settings


class LinkDef(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    link_id: int = Field(..., alias="id", ge=0, description="Índice do enlace (0..|E|-1).", examples=[0])
    src: int = Field(..., ge=0, description="Nó de origem.", examples=[0])
    dst: int = Field(..., ge=0, description="Nó de destino.", examples=[1])
    capacity: float = Field(..., alias="capacity_bps", gt=0, description="Capacidade em bits/s.", examples=[2.5e6])
    prop_delay: float = Field(..., alias="prop_delay_s", ge=0, description="Atraso de propagação em segundos.", examples=[0.002])
    buffer: int = Field(default_factory=lambda: settings.BUFFER_PKTS, alias="buffer_pkts", ge=1, description="Tamanho do buffer em pacotes.")

    @model_validator(mode="after")
    def validate_not_self_loop(self):
        if self.src == self.dst:
            raise ValueError(f"Enlace {self.link_id} é um laço no nó {self.src}")
        return self


class TopologyGraph(BaseModel):
    """Grafo de transporte (nós = switches, enlaces capacitados). Imutável após a carga."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1, description="Nome da topologia.", examples=["germany50"])
    nodes: Tuple[int, ...] = Field(..., description="Identificadores dos nós (inteiros não negativos).")
    links: Tuple[LinkDef, ...] = Field(..., description="Enlaces da topologia.")

    _links_by_id: Dict[int, LinkDef] = PrivateAttr(default_factory=dict)

    @field_validator("nodes")
    @classmethod
    def validate_nodes(cls, v):
        if len(v) < 2:
            raise ValueError("A topologia precisa de pelo menos 2 nós")
        if any(n < 0 for n in v):
            raise ValueError("Identificadores de nós devem ser não negativos")
        if len(set(v)) != len(v):
            duplicated = sorted({n for n in v if v.count(n) > 1})
            raise ValueError(f"Nós duplicados: {duplicated}")
        return v

    @model_validator(mode="after")
    def validate_links(self):
        if len(self.links) < 1:
            raise ValueError("A topologia precisa de pelo menos 1 enlace")
        declared = set(self.nodes)
        ids = [link.link_id for link in self.links]
        if len(set(ids)) != len(ids):
            duplicated = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"Identificadores de enlace duplicados: {duplicated}")
        if sorted(ids) != list(range(len(ids))):
            raise ValueError(f"Identificadores de enlace devem ser densos 0..{len(ids) - 1}")
        for link in self.links:
            for endpoint in (link.src, link.dst):
                if endpoint not in declared:
                    raise ValueError(f"Enlace {link.link_id} referencia nó desconhecido {endpoint}")
        return self

    def model_post_init(self, __context) -> None:
        self._links_by_id = {link.link_id: link for link in self.links}

    def link(self, link_id: int) -> LinkDef:
        return self._links_by_id[link_id]

    @property
    def links_by_id(self) -> Dict[int, LinkDef]:
        return self._links_by_id

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def link_count(self) -> int:
        return len(self.links)
