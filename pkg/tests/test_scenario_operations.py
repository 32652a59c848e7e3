import csv
from pathlib import Path

import pytest

from src.cli import build_parser, main
from src.core.exceptions import ScenarioError
from src.schemas.drift import KswinConfig
from src.schemas.run import RunConfig, RunStatus, RunSummary
from src.schemas.traffic import DistributionKind, DistributionSpec, FlowSpec
from src.schemas.training import TrainConfig
from src.services.scenario_service import phase_boundaries, run_scenario, snapshot_groups, window_sweep

ROOT = Path(__file__).resolve().parents[1]
SYNTHETIC8 = ROOT / "data" / "topologies" / "synthetic8.json"


def small_config(out: Path, **overrides) -> RunConfig:
    fields = dict(
        topology=SYNTHETIC8,
        schedule="default:40",
        seed=11,
        kswin=KswinConfig(alpha=0.01, window_size=20, stat_size=5, seed=11),
        train=TrainConfig(learning_rate=0.01, epochs=2, batch_size=2, seed=11),
        out=out,
        flows_per_second=5.0,
        flow_duration=2.0,
        snapshot_s=2.0,
        dataset_snapshots=3,
        embed_dim=4,
        mp_iterations=2,
        nmse_window=20,
        retrain_lag=1,
    )
    fields.update(overrides)
    return RunConfig(**fields)


def _csv_rows(path: Path):
    with path.open(encoding="utf-8") as fh:
        return list(csv.reader(fh))


def _flow(flow_id: int, start: float, phase: int) -> FlowSpec:
    return FlowSpec(
        flow_id=flow_id,
        origin=0,
        destination=1,
        start=start,
        duration=1.0,
        packet_size=DistributionSpec(kind=DistributionKind.deterministic, value=100),
        packet_rate=DistributionSpec(kind=DistributionKind.deterministic, value=10),
        phase=phase,
    )


def test_snapshot_groups_by_start():
    flows = [_flow(0, 0.0, 0), _flow(1, 1.9, 0), _flow(2, 2.0, 0), _flow(3, 6.5, 1)]
    groups = snapshot_groups(flows, 2.0)

    assert [[f.flow_id for f in g] for g in groups] == [[0, 1], [2], [3]]


def test_phase_boundaries_marks_first_sample_of_each_phase():
    flows = [_flow(i, float(i), phase) for i, phase in enumerate([0, 0, 1, 1, 1, 2])]

    assert phase_boundaries(flows) == [2, 5]


async def test_run_writes_artifacts(tmp_path):
    summary = await run_scenario(small_config(tmp_path, compare=True))

    assert summary.status == RunStatus.completed
    assert summary.topology == "synthetic8"
    assert summary.flows > 0
    assert len(summary.phase_boundaries) == 3
    assert summary.deployed_versions[0] == 1
    assert summary.deployed_versions == sorted(set(summary.deployed_versions))
    assert summary.sla_sync.total_flows == summary.flows
    assert summary.sla_frozen is not None
    assert summary.training[0].version == 1

    for name in ("summary.json", "nmse_sync.csv", "nmse_frozen.csv", "drifts.csv", "sla_report.txt"):
        assert (tmp_path / name).exists(), name
    assert (tmp_path / "logs" / "training.jsonl").exists()
    assert (tmp_path / "store" / "traffic.jsonl").exists()
    assert (tmp_path / "store" / "labeled.jsonl").exists()

    assert _csv_rows(tmp_path / "nmse_sync.csv")[0] == ["window", "size", "partial", "nmse_db"]
    assert _csv_rows(tmp_path / "drifts.csv")[0] == ["sample_index", "snapshot", "phase", "statistic", "p_value", "action"]
    saved = RunSummary.model_validate_json((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert saved == summary


async def test_run_is_deterministic(tmp_path):
    await run_scenario(small_config(tmp_path / "a"))
    await run_scenario(small_config(tmp_path / "b"))

    for name in ("summary.json", "nmse_sync.csv", "drifts.csv", "sla_report.txt"):
        assert (tmp_path / "a" / name).read_text(encoding="utf-8") == (tmp_path / "b" / name).read_text(encoding="utf-8"), name


async def test_run_without_sync_keeps_initial_model(tmp_path):
    summary = await run_scenario(small_config(tmp_path, sync=False, compare=True))

    assert summary.retrains == 0
    assert summary.deployed_versions == [1]
    assert summary.mean_nmse_sync == summary.mean_nmse_frozen
    actions = {row[-1] for row in _csv_rows(tmp_path / "drifts.csv")[1:]}
    assert actions <= {"detected"}


async def test_run_with_long_lag_serves_old_model(tmp_path):
    summary = await run_scenario(small_config(tmp_path, compare=True, retrain_lag=10_000))

    assert summary.mean_nmse_sync == summary.mean_nmse_frozen
    assert summary.sla_sync == summary.sla_frozen


async def test_run_without_lag_swaps_on_trigger_snapshot(tmp_path):
    summary = await run_scenario(small_config(tmp_path, compare=True, retrain_lag=0))
    triggered = [row for row in _csv_rows(tmp_path / "drifts.csv")[1:] if row[-1] == "triggered"]

    assert len(triggered) == summary.retrains
    assert summary.deployed_versions == list(range(1, summary.retrains + 2))
    if summary.retrains:
        assert summary.mean_nmse_sync != summary.mean_nmse_frozen


async def test_run_failure_writes_partial_summary(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{ não é json", encoding="utf-8")
    out = tmp_path / "out"

    with pytest.raises(ScenarioError):
        await run_scenario(small_config(out, topology=broken))

    summary = RunSummary.model_validate_json((out / "summary.json").read_text(encoding="utf-8"))
    assert summary.status == RunStatus.failed
    assert summary.partial is True
    assert summary.error.startswith("TopologyError")


def test_window_sweep_writes_csv(tmp_path):
    cfg = small_config(tmp_path)
    rates = [1.0 + (i % 7) * 0.1 for i in range(200)] + [50.0 + (i % 5) for i in range(200)]

    rows = window_sweep(cfg, [20, 40], rates=rates)

    assert [r.window_size for r in rows] == [20, 40]
    assert all(r.detections >= 1 for r in rows)
    assert _csv_rows(tmp_path / "window_sweep.csv") == [
        ["window_size", "detections"],
        *[[str(r.window_size), str(r.detections)] for r in rows],
    ]


def test_window_sweep_requires_two_sizes(tmp_path):
    with pytest.raises(ScenarioError):
        window_sweep(small_config(tmp_path), [20], rates=[1.0] * 50)


def test_window_sweep_rejects_window_too_small_for_buffer(tmp_path):
    with pytest.raises(ScenarioError):
        window_sweep(small_config(tmp_path), [20, 8], rates=[1.0] * 50)


def test_parser_options():
    args = build_parser().parse_args(["run", "--sync", "off", "--compare", "--window-size", "120"])

    assert args.command == "run"
    assert args.sync is False
    assert args.compare is True
    assert args.window_size == 120


def test_parser_rejects_bad_values():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--sync", "talvez"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["sweep", "--window-sizes", "50"])


def test_cli_invalid_config_returns_2(tmp_path):
    assert main(["run", "--topology", str(SYNTHETIC8), "--alpha", "2", "--out", str(tmp_path)]) == 2
    assert main(["run", "--topology", str(tmp_path / "nada.json"), "--out", str(tmp_path)]) == 2


def test_cli_sweep(tmp_path):
    code = main(
        [
            "sweep",
            "--topology", str(SYNTHETIC8),
            "--schedule", "default:20",
            "--flows-per-second", "2",
            "--stat-size", "5",
            "--window-sizes", "10,20",
            "--out", str(tmp_path),
        ]
    )

    assert code == 0
    rows = _csv_rows(tmp_path / "window_sweep.csv")
    assert [row[0] for row in rows] == ["window_size", "10", "20"]
