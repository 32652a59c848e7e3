"""
Orquestração do laço fechado do gêmeo digital.

Uma execução:
    1. popula a base rotulada com um dataset por fase do cronograma;
    2. treina o VTwin inicial com o dataset da fase 0;
    3. percorre o tráfego operacional em snapshots: oráculo -> bases -> inferência
       -> detector KSWIN -> (gatilho de retreino, se sync ligado);
    4. grava as séries de NMSE, os eventos de deriva, o relatório de SLA e o summary.json.

Os arquivos de resultado são determinísticos por semente; horários de parede só
aparecem nos logs em `<out>/logs/`.
"""

import asyncio
import csv
import json
import logging
import math
import shutil
import threading
import time
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from src.core.exceptions import NdtError, ScenarioError
from src.notifications import JsonlNotificationChannel, LoggingNotificationChannel, NotificationService
from src.schemas.drift import DriftEvent, KswinConfig
from src.schemas.evaluation import NmseWindow
from src.schemas.features import HeteroGraph, LabeledExample
from src.schemas.records import LabeledRecord, TrafficRecord
from src.schemas.run import RetrainScope, RunConfig, RunStatus, RunSummary, SlaTotals, WindowSweepRow
from src.schemas.sync import SyncMode
from src.schemas.topology import TopologyGraph
from src.schemas.traffic import FlowSpec, ScenarioSchedule
from src.schemas.training import EpochReport
from src.services.datastore_service import Datastore, RecordStore
from src.services.drift_service import KswinDetector, count_detections
from src.services.evaluation_service import (
    assign_pdb,
    classify_and_report,
    drift_table,
    mean_finite_nmse,
    render_sla_report,
    windowed_nmse,
)
from src.services.feature_service import group_snapshots, hypergraph_from_examples
from src.services.ptwin_service import label_dataset
from src.services.sync_service import DeployedModel, SyncManager, fresh_trainer
from src.services.topology_service import load_topology
from src.services.traffic_service import generate_flows, resolve_schedule, single_phase
from src.services.training_service import TrainingResult
from src.services.vtwin.model import predict_delay

logger = logging.getLogger(__name__)

STORE_DIR = "store"
LOG_DIR = "logs"


@dataclass
class _Streams:
    dataset_traffic: np.random.Generator
    dataset_oracle: np.random.Generator
    stream_traffic: np.random.Generator
    stream_oracle: np.random.Generator

    @classmethod
    def of(cls, seed: int) -> "_Streams":
        return cls(*(np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(4)))


@dataclass(frozen=True)
class DriftRow:
    event: DriftEvent
    snapshot: int
    phase: int
    action: str


class TrainingLog:
    """training.jsonl: uma linha por época e uma por treino concluído."""

    def __init__(self, path: Path):
        self.path = path
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _write(self, payload: dict) -> None:
        line = json.dumps({**payload, "wall_time": time.time()}, sort_keys=True)
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def epoch(self, version: int, report: EpochReport) -> None:
        self._write({"event": "epoch", "version": version, **report.model_dump()})

    def finished(self, result: TrainingResult) -> None:
        self._write({"event": "trained", **result.summary().model_dump(exclude={"history"})})


def snapshot_groups(flows: Sequence[FlowSpec], snapshot_s: float) -> List[List[FlowSpec]]:
    """Agrupa os fluxos em snapshots de medição pelo instante de início."""
    groups: Dict[int, List[FlowSpec]] = defaultdict(list)
    for flow in flows:
        groups[int(math.floor(flow.start / snapshot_s + 1e-9))].append(flow)
    return [groups[k] for k in sorted(groups)]


def phase_boundaries(flows: Sequence[FlowSpec]) -> List[int]:
    """Índice da primeira amostra de cada mudança de fase no fluxo operacional."""
    return [i for i in range(1, len(flows)) if flows[i].phase != flows[i - 1].phase]


def to_records(
    flows: Sequence[FlowSpec], examples: Sequence[LabeledExample], phase: Optional[int] = None
) -> Tuple[List[TrafficRecord], List[LabeledRecord]]:
    traffic, labeled = [], []
    for flow, ex in zip(flows, examples):
        fields = dict(
            flow_id=flow.flow_id,
            timestamp=flow.end,
            snapshot_id=ex.snapshot_id,
            phase=flow.phase if phase is None else phase,
            origin=flow.origin,
            destination=flow.destination,
            path=ex.path,
            flow_features=ex.flow_features,
        )
        traffic.append(TrafficRecord(**fields))
        labeled.append(LabeledRecord(**fields, link_context=ex.link_context, y=ex.y))
    return traffic, labeled


def phase_graphs(store: Datastore, phase: Optional[int]) -> List[HeteroGraph]:
    return group_snapshots(record.to_example() for record in store.labeled_for_phase(phase))


def collect_datasets(
    cfg: RunConfig, g: TopologyGraph, sched: ScenarioSchedule, store: Datastore, streams: _Streams
) -> int:
    """
    Um dataset rotulado por fase do cronograma, com tráfego independente do
    operacional. Retorna o próximo snapshot_id livre.
    """
    snapshot_id = 0
    flow_id = 0
    duration = cfg.dataset_snapshots * cfg.snapshot_s
    for index in range(len(sched.phases)):
        flows = generate_flows(
            g,
            single_phase(sched, index, duration),
            cfg.flows_per_second,
            streams.dataset_traffic,
            flow_duration=cfg.flow_duration,
            first_flow_id=flow_id,
        )
        flow_id += len(flows)
        for group in snapshot_groups(flows, cfg.snapshot_s):
            examples = label_dataset(g, group, streams.dataset_oracle, snapshot_id=snapshot_id)
            _, labeled = to_records(group, examples, phase=index)
            store.datasets.extend(labeled)
            snapshot_id += 1
        logger.info("Dataset da fase %d: %d fluxos rotulados", index, len(flows))
    return snapshot_id


def _write_nmse(path: Path, windows: Sequence[NmseWindow]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window", "size", "partial", "nmse_db"])
        for w in windows:
            writer.writerow([w.index, w.size, int(w.partial), "-inf" if math.isinf(w.nmse_db) else repr(w.nmse_db)])


def _write_drifts(path: Path, rows: Sequence[DriftRow]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_index", "snapshot", "phase", "statistic", "p_value", "action"])
        for row in rows:
            writer.writerow(
                [row.event.sample_index, row.snapshot, row.phase, repr(row.event.statistic), repr(row.event.p_value), row.action]
            )


def _write_summary(out: Path, summary: RunSummary) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")


def _reset_outputs(out: Path) -> None:
    """Remove os artefatos de uma execução anterior no mesmo diretório."""
    for name in (STORE_DIR, LOG_DIR):
        if (out / name).exists():
            shutil.rmtree(out / name)
    for name in ("nmse_sync.csv", "nmse_frozen.csv", "drifts.csv", "sla_report.txt", "summary.json"):
        (out / name).unlink(missing_ok=True)
    out.mkdir(parents=True, exist_ok=True)


async def run_scenario(cfg: RunConfig) -> RunSummary:
    """
    Executa o cenário completo e grava os artefatos em `cfg.out`.

    Raises:
        ScenarioError: qualquer erro de domínio; o summary.json é gravado com
        status "failed" e as saídas já escritas ficam marcadas como parciais.
    """
    out = Path(cfg.out)
    _reset_outputs(out)
    summary = RunSummary(schedule=cfg.schedule, seed=cfg.seed, sync=cfg.sync, compare=cfg.compare)
    try:
        await _run(cfg, out, summary)
    except NdtError as e:
        logger.error("Execução abortada: %s", e)
        summary.status = RunStatus.failed
        summary.error = f"{type(e).__name__}: {e}"
        summary.partial = True
        _write_summary(out, summary)
        raise ScenarioError(f"Execução abortada: {e}") from e
    _write_summary(out, summary)
    return summary


async def _run(cfg: RunConfig, out: Path, summary: RunSummary) -> None:
    g = load_topology(cfg.topology)
    sched = resolve_schedule(cfg.schedule)
    summary.topology = g.name
    streams = _Streams.of(cfg.seed)
    logs = out / LOG_DIR
    training_log = TrainingLog(logs / "training.jsonl")
    control = NotificationService([JsonlNotificationChannel(logs / "control.jsonl"), LoggingNotificationChannel()])
    drift_log = NotificationService([JsonlNotificationChannel(logs / "drift_events.jsonl")])

    store = Datastore(out / STORE_DIR)
    try:
        await store.weights.init()
        next_snapshot = collect_datasets(cfg, g, sched, store, streams)

        trainer = fresh_trainer(
            cfg.train, cfg.embed_dim, cfg.embed_dim, cfg.mp_iterations, cfg.seed, on_epoch=training_log.epoch
        )
        initial = await asyncio.to_thread(trainer, phase_graphs(store, 0), 1)
        training_log.finished(initial)
        summary.training.append(initial.summary())
        frozen = initial.weights
        await store.weights.save_weights(frozen, reason="initial")

        deployed = DeployedModel(frozen)
        latest_phase = [0]

        def provider() -> List[HeteroGraph]:
            scope = None if cfg.retrain_scope == RetrainScope.all else latest_phase[0]
            return phase_graphs(store, scope)

        manager = SyncManager(deployed, store.weights, provider, trainer, notifier=control)
        await manager.start()
        detector = KswinDetector(cfg.kswin)

        flows = generate_flows(g, sched, cfg.flows_per_second, streams.stream_traffic, flow_duration=cfg.flow_duration)
        groups = snapshot_groups(flows, cfg.snapshot_s)
        summary.flows = len(flows)
        summary.snapshots = len(groups)
        summary.phase_boundaries = phase_boundaries(flows)

        y_parts: List[np.ndarray] = []
        sync_parts: List[np.ndarray] = []
        frozen_parts: List[np.ndarray] = []
        pdb: List[float] = []
        served_versions: List[int] = []
        drifts: List[DriftRow] = []
        swap_at: Optional[int] = None

        async def complete_retrain() -> None:
            before = len(manager.histories)
            await manager.finish_retrain()
            if len(manager.histories) > before:
                training_log.finished(manager.histories[-1])

        for s, group in enumerate(groups):
            examples = label_dataset(g, group, streams.stream_oracle, snapshot_id=next_snapshot + s)
            traffic, labeled = to_records(group, examples)
            store.traffic.extend(traffic)
            store.labeled.extend(labeled)
            latest_phase[0] = group[-1].phase

            # o detector consome as medições do snapshot antes da inferência sobre ele
            for ex in examples:
                event = detector.update(ex.flow_features.avg_traffic_rate)
                if event is None:
                    continue
                await drift_log.notify(
                    "drift",
                    {"sample_index": event.sample_index, "statistic": event.statistic, "p_value": event.p_value},
                )
                action = "detected"
                if cfg.sync:
                    locked = manager.mode == SyncMode.retraining
                    if await manager.on_drift(event):
                        action = "triggered"
                        swap_at = s + cfg.retrain_lag
                    else:
                        action = "ignored" if locked else "no_data"
                drifts.append(DriftRow(event=event, snapshot=s, phase=group[-1].phase, action=action))

            if swap_at is not None and s >= swap_at:
                await complete_retrain()
                swap_at = None

            graph = hypergraph_from_examples(examples)
            served = deployed.predict(graph)
            if not served_versions or served_versions[-1] != served.version:
                served_versions.append(served.version)
            y_parts.append(graph.labels)
            sync_parts.append(served.y_hat)
            if cfg.compare:
                frozen_parts.append(predict_delay(graph, frozen))
            pdb.extend(assign_pdb(g, flow, cfg.pdb) for flow in group)

        if swap_at is not None:
            await complete_retrain()
        final = deployed.current
        if not await store.weights.has_version(final.version):
            await store.weights.save_weights(final, reason="final")
        if served_versions[-1:] != [final.version]:
            served_versions.append(final.version)

        y = np.concatenate(y_parts) if y_parts else np.zeros(0)
        y_sync = np.concatenate(sync_parts) if sync_parts else np.zeros(0)
        y_frozen = np.concatenate(frozen_parts) if cfg.compare and frozen_parts else None

        sync_windows = windowed_nmse(y, y_sync, cfg.nmse_window) if y.size else []
        _write_nmse(out / "nmse_sync.csv", sync_windows)
        sync_report = classify_and_report(y_sync, y, pdb, cfg.nmse_window)
        frozen_report = None
        if y_frozen is not None:
            frozen_windows = windowed_nmse(y, y_frozen, cfg.nmse_window) if y.size else []
            _write_nmse(out / "nmse_frozen.csv", frozen_windows)
            frozen_report = classify_and_report(y_frozen, y, pdb, cfg.nmse_window)
            summary.mean_nmse_frozen = mean_finite_nmse(frozen_windows)
            summary.sla_frozen = SlaTotals.of(frozen_report)
        _write_drifts(out / "drifts.csv", drifts)
        (out / "sla_report.txt").write_text(render_sla_report(cfg.pdb, sync_report, frozen_report), encoding="utf-8")

        state = await manager.state()
        summary.detections = len(drifts)
        summary.retrains = state.retrains
        summary.ignored_events = state.ignored_events
        summary.deployed_versions = served_versions
        summary.mean_nmse_sync = mean_finite_nmse(sync_windows)
        summary.sla_sync = SlaTotals.of(sync_report)
        summary.drifts = drift_table(
            [row.event.sample_index for row in drifts],
            summary.phase_boundaries,
            y,
            y_sync,
            y_frozen,
            cfg.nmse_window,
        )
        summary.training.extend(result.summary() for result in manager.histories)
        logger.info(
            "Execução concluída: %d fluxos, %d derivas, %d retreinos, NMSE médio %s dB",
            summary.flows,
            summary.detections,
            summary.retrains,
            f"{summary.mean_nmse_sync:.2f}" if summary.mean_nmse_sync is not None else "-",
        )
    finally:
        await store.close()


def recorded_rates(cfg: RunConfig) -> List[float]:
    """
    Série de taxas médias de tráfego do fluxo operacional: lida da base de
    tráfego de uma execução anterior em `cfg.out` ou regenerada pelo oráculo.
    """
    path = Path(cfg.out) / STORE_DIR / "traffic.jsonl"
    if path.exists():
        records = RecordStore(path, TrafficRecord, "traffic").scan().records
        if records:
            return [r.flow_features.avg_traffic_rate for r in records]
    g = load_topology(cfg.topology)
    sched = resolve_schedule(cfg.schedule)
    streams = _Streams.of(cfg.seed)
    flows = generate_flows(g, sched, cfg.flows_per_second, streams.stream_traffic, flow_duration=cfg.flow_duration)
    rates: List[float] = []
    for group in snapshot_groups(flows, cfg.snapshot_s):
        examples = label_dataset(g, group, streams.stream_oracle)
        rates.extend(ex.flow_features.avg_traffic_rate for ex in examples)
    return rates


def window_sweep(cfg: RunConfig, window_sizes: Sequence[int], rates: Optional[Sequence[float]] = None) -> List[WindowSweepRow]:
    """Uma passada completa do detector por tamanho de janela; grava window_sweep.csv."""
    if len(window_sizes) < 2:
        raise ScenarioError("A varredura exige ao menos dois tamanhos de janela")
    rates = list(recorded_rates(cfg) if rates is None else rates)
    rows = []
    for w in window_sizes:
        try:
            kswin = KswinConfig(alpha=cfg.kswin.alpha, window_size=w, stat_size=cfg.kswin.stat_size, seed=cfg.kswin.seed)
        except ValidationError as e:
            raise ScenarioError(f"Janela {w} inválida para stat_size {cfg.kswin.stat_size}") from e
        rows.append(WindowSweepRow(window_size=w, detections=count_detections(rates, kswin)))
        logger.info("Janela %d: %d detecções", w, rows[-1].detections)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "window_sweep.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_size", "detections"])
        for row in rows:
            writer.writerow([row.window_size, row.detections])
    return rows
