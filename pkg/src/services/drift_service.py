import logging
import math
import threading
from collections import deque
from typing import Iterable, List, Optional

import numpy as np

from src.core.exceptions import MetricError
from src.schemas.drift import DetectorSnapshot, DriftEvent, KswinConfig

logger = logging.getLogger(__name__)

_SERIES_TERMS = 100
_SERIES_EPS = 1e-12


def ks_statistic(a, b) -> float:
    """D = sup_x |F_a(x) - F_b(x)| avaliado em todos os pontos das duas amostras."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise MetricError("Estatística KS exige amostras não vazias")
    points = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, points, side="right") / a.size
    cdf_b = np.searchsorted(b, points, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_pvalue(d: float, n: int, m: int) -> float:
    """
    p-valor assintótico de Kolmogorov:
    p = 2 * soma_k (-1)^(k-1) exp(-2 k^2 lambda^2), lambda = (sqrt(e) + 0.12 + 0.11/sqrt(e)) * D,
    e = n*m/(n+m). Retorna 1 quando a série não converge em 100 termos.
    """
    if n < 1 or m < 1:
        raise MetricError(f"Tamanhos de amostra inválidos: n={n}, m={m}")
    if d <= 0:
        return 1.0
    root = math.sqrt(n * m / (n + m))
    lam = (root + 0.12 + 0.11 / root) * d
    total = 0.0
    sign = 1.0
    for k in range(1, _SERIES_TERMS + 1):
        term = sign * 2.0 * math.exp(-2.0 * k * k * lam * lam)
        total += term
        if abs(term) <= _SERIES_EPS:
            return min(1.0, max(0.0, total))
        sign = -sign
    return 1.0


class KswinDetector:
    """
    Detector KSWIN sobre um fluxo univariado (taxa média de tráfego por fluxo).

    Com a janela cheia, compara as r amostras mais recentes com r amostras
    sorteadas (sem reposição) das w - r mais antigas. p <= alpha emite um
    DriftEvent e a janela passa a conter só as últimas r amostras.
    """

    def __init__(self, cfg: Optional[KswinConfig] = None):
        self.cfg = cfg or KswinConfig()
        self._rng = np.random.default_rng(self.cfg.seed)
        self._window: deque = deque(maxlen=self.cfg.window_size)
        self._lock = threading.Lock()
        self.samples_seen = 0
        self.comparisons = 0
        self.events: List[DriftEvent] = []

    def update(self, x: float) -> Optional[DriftEvent]:
        with self._lock:
            index = self.samples_seen
            self.samples_seen += 1
            self._window.append(float(x))
            w, r = self.cfg.window_size, self.cfg.stat_size
            if len(self._window) < w:
                return None

            values = np.fromiter(self._window, dtype=np.float64, count=w)
            recent = values[w - r :]
            reference = values[: w - r][self._rng.choice(w - r, size=r, replace=False)]
            d = ks_statistic(reference, recent)
            p = ks_pvalue(d, r, r)
            self.comparisons += 1
            if p > self.cfg.alpha:
                return None

            event = DriftEvent(sample_index=index, statistic=d, p_value=p)
            self.events.append(event)
            self._window = deque(recent.tolist(), maxlen=w)
            logger.info("Deriva detectada na amostra %d (D=%.3f, p=%.3g)", index, d, p)
            return event

    def feed(self, stream: Iterable[float]) -> List[DriftEvent]:
        """Consome um fluxo inteiro e devolve os eventos emitidos."""
        events = []
        for x in stream:
            event = self.update(x)
            if event is not None:
                events.append(event)
        return events

    def snapshot(self) -> DetectorSnapshot:
        with self._lock:
            return DetectorSnapshot(
                samples_seen=self.samples_seen,
                window_fill=len(self._window),
                comparisons=self.comparisons,
                events=list(self.events),
            )


def count_detections(stream: Iterable[float], cfg: KswinConfig) -> int:
    return len(KswinDetector(cfg).feed(stream))
