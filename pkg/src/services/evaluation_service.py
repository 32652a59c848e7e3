import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from src.core.exceptions import MetricError
from src.schemas.evaluation import DriftComparison, NmseWindow, SlaPolicy, ViolationReport, ViolationWindow
from src.schemas.topology import TopologyGraph
from src.schemas.traffic import FlowSpec
from src.services.topology_service import path_prop_delay, shortest_path

logger = logging.getLogger(__name__)

NEG_INF = float("-inf")


def _aligned(y, y_hat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise MetricError(f"Vetores desalinhados: {y.shape} e {y_hat.shape}")
    return y, y_hat


def nmse_db(y, y_hat) -> float:
    """10 log10( soma (y - y_hat)^2 / soma y^2 ); -inf quando o numerador é zero."""
    y, y_hat = _aligned(y, y_hat)
    if y.size == 0:
        raise MetricError("NMSE exige ao menos um exemplo")
    energy = float(np.sum(y * y))
    if energy == 0.0:
        raise MetricError("NMSE indefinido: todos os rótulos são zero")
    error = float(np.sum((y - y_hat) ** 2))
    if error == 0.0:
        return NEG_INF
    return 10.0 * math.log10(error / energy)


class WindowedNmse:
    """NMSE em janelas consecutivas sem sobreposição, alimentado em blocos."""

    def __init__(self, window: int = 100):
        if window < 1:
            raise MetricError(f"Janela deve ser >= 1, recebido {window}")
        self.window = window
        self._y: List[float] = []
        self._y_hat: List[float] = []
        self.windows: List[NmseWindow] = []

    def push(self, y, y_hat) -> List[NmseWindow]:
        y, y_hat = _aligned(y, y_hat)
        self._y.extend(y.tolist())
        self._y_hat.extend(y_hat.tolist())
        closed = []
        while len(self._y) >= self.window:
            closed.append(self._close(self.window, partial=False))
        return closed

    def _close(self, size: int, partial: bool) -> NmseWindow:
        y, y_hat = self._y[:size], self._y_hat[:size]
        del self._y[:size], self._y_hat[:size]
        result = NmseWindow(index=len(self.windows), size=size, nmse_db=nmse_db(y, y_hat), partial=partial)
        self.windows.append(result)
        return result

    def finish(self) -> List[NmseWindow]:
        if self._y:
            self._close(len(self._y), partial=True)
        return self.windows


def windowed_nmse(y, y_hat, window: int = 100) -> List[NmseWindow]:
    series = WindowedNmse(window)
    series.push(y, y_hat)
    return series.finish()


def assign_pdb(g: TopologyGraph, flow: FlowSpec, policy: Optional[SlaPolicy] = None) -> float:
    """PDB = max(piso, beta * propagação do caminho do fluxo)."""
    policy = policy or SlaPolicy()
    prop = path_prop_delay(g, shortest_path(g, flow.origin, flow.destination))
    return max(policy.floor, policy.beta * prop)


def classify_and_report(y_hat, y, pdb, window: int = 100) -> ViolationReport:
    """Violação prevista quando y_hat > pdb e real quando y > pdb; conta as divergências."""
    y, y_hat = _aligned(y, y_hat)
    pdb = np.asarray(pdb, dtype=np.float64)
    if pdb.shape != y.shape:
        raise MetricError(f"PDB com {pdb.shape} para {y.shape} fluxos")
    predicted = y_hat > pdb
    actual = y > pdb
    wrong = predicted != actual

    windows = []
    for index, start in enumerate(range(0, y.size, window)):
        stop = min(start + window, y.size)
        windows.append(
            ViolationWindow(
                index=index,
                size=stop - start,
                predicted_violations=int(predicted[start:stop].sum()),
                actual_violations=int(actual[start:stop].sum()),
                misclassified=int(wrong[start:stop].sum()),
                partial=stop - start < window,
            )
        )
    return ViolationReport(
        total_flows=int(y.size),
        predicted_violations=int(predicted.sum()),
        actual_violations=int(actual.sum()),
        misclassified=int(wrong.sum()),
        windows=windows,
    )


def _mean_finite(windows: Sequence[NmseWindow], lo: int, hi: int, window: int) -> Optional[float]:
    values = [
        w.nmse_db
        for w in windows
        if w.index * window >= lo and w.index * window + w.size <= hi and math.isfinite(w.nmse_db)
    ]
    return float(np.mean(values)) if values else None


def drift_table(
    drift_samples: Sequence[int],
    boundaries: Sequence[int],
    y,
    y_hat_sync,
    y_hat_frozen=None,
    window: int = 100,
) -> List[DriftComparison]:
    """
    NMSE médio das janelas antes e depois de cada deriva detectada, com e sem
    sincronização, e a melhora relativa do MSE linear depois da deriva. Sem a
    série congelada, as colunas correspondentes ficam vazias.
    """
    y = np.asarray(y, dtype=np.float64)
    y_hat_sync = np.asarray(y_hat_sync, dtype=np.float64)
    sync = windowed_nmse(y, y_hat_sync, window) if y.size else []
    frozen = []
    if y_hat_frozen is not None:
        y_hat_frozen = np.asarray(y_hat_frozen, dtype=np.float64)
        frozen = windowed_nmse(y, y_hat_frozen, window) if y.size else []

    rows = []
    edges = [0, *drift_samples, int(y.size)]
    for i, sample in enumerate(drift_samples):
        lo, hi = edges[i], edges[i + 2]
        nearest = min(boundaries, key=lambda b: abs(sample - b)) if boundaries else None
        improvement = None
        if y_hat_frozen is not None and hi > sample:
            mse_sync = float(np.mean((y[sample:hi] - y_hat_sync[sample:hi]) ** 2))
            mse_frozen = float(np.mean((y[sample:hi] - y_hat_frozen[sample:hi]) ** 2))
            if mse_frozen > 0:
                improvement = 1.0 - mse_sync / mse_frozen
        rows.append(
            DriftComparison(
                drift_index=i,
                sample_index=sample,
                nearest_boundary=nearest,
                detection_delay=None if nearest is None else sample - nearest,
                pre_nmse_sync=_mean_finite(sync, lo, sample, window),
                post_nmse_sync=_mean_finite(sync, sample, hi, window),
                pre_nmse_frozen=_mean_finite(frozen, lo, sample, window),
                post_nmse_frozen=_mean_finite(frozen, sample, hi, window),
                post_mse_improvement=improvement,
            )
        )
    return rows


def mean_finite_nmse(windows: Sequence[NmseWindow]) -> Optional[float]:
    values = [w.nmse_db for w in windows if math.isfinite(w.nmse_db)]
    return float(np.mean(values)) if values else None


def render_sla_report(
    policy: SlaPolicy, sync_report: ViolationReport, frozen_report: Optional[ViolationReport] = None
) -> str:
    """Resumo em texto do monitoramento de SLA, com a série por janela."""
    lines = [
        "Monitoramento de SLA",
        f"PDB = max({policy.floor:g} s, {policy.beta:g} x propagação do caminho)",
        f"fluxos avaliados: {sync_report.total_flows}",
        f"violações reais: {sync_report.actual_violations}",
        f"VTwin sincronizado: {sync_report.predicted_violations} previstas, {sync_report.misclassified} mal classificados",
    ]
    if frozen_report is not None:
        lines.append(
            f"VTwin congelado: {frozen_report.predicted_violations} previstas, {frozen_report.misclassified} mal classificados"
        )
    lines.append("")
    header = "janela  tamanho  reais  previstas_sync  erros_sync"
    if frozen_report is not None:
        header += "  previstas_congelado  erros_congelado"
    lines.append(header)
    frozen_windows = frozen_report.windows if frozen_report is not None else [None] * len(sync_report.windows)
    for window, frozen in zip(sync_report.windows, frozen_windows):
        row = (
            f"{window.index:6d}  {window.size:7d}{'*' if window.partial else ' '}"
            f"{window.actual_violations:5d}  {window.predicted_violations:14d}  {window.misclassified:10d}"
        )
        if frozen is not None:
            row += f"  {frozen.predicted_violations:19d}  {frozen.misclassified:15d}"
        lines.append(row)
    if any(w.partial for w in sync_report.windows):
        lines.append("* janela parcial")
    return "\n".join(lines) + "\n"
