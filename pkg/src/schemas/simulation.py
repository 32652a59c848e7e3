from dataclasses import dataclass, field
from typing import Dict, List, Tuple


@dataclass(frozen=True)
class FlowOutcome:
    """Resultado de um fluxo no gêmeo físico."""

    flow_id: int
    path: Tuple[int, ...]
    duration: float
    sent: int
    delivered: int
    dropped: int
    bytes_sent: int
    avg_delay: float  # rótulo y, em segundos

    @property
    def avg_pkts_sent(self) -> float:
        """Pacotes enviados por janela de medição de 1 s."""
        return self.sent / self.duration

    @property
    def avg_pkt_loss(self) -> float:
        return self.dropped / self.duration

    @property
    def avg_traffic_rate(self) -> float:
        return self.bytes_sent * 8.0 / self.duration

    @property
    def mean_packet_size(self) -> float:
        return self.bytes_sent / self.sent if self.sent else 0.0


@dataclass(frozen=True)
class LinkOutcome:
    link_id: int
    load: float  # fração da capacidade no sentido mais ocupado, em [0, 1]
    flows: Tuple[int, ...]  # índices (posição em SimResult.flows) dos fluxos que usam o enlace
    offered: int
    transmitted: int
    dropped: int


@dataclass(frozen=True)
class SimResult:
    flows: List[FlowOutcome] = field(default_factory=list)
    links: List[LinkOutcome] = field(default_factory=list)
    window: Tuple[float, float] = (0.0, 0.0)

    @property
    def labels(self) -> List[float]:
        return [f.avg_delay for f in self.flows]

    def flow_by_id(self) -> Dict[int, FlowOutcome]:
        return {f.flow_id: f for f in self.flows}

    @property
    def is_empty(self) -> bool:
        return not self.flows
