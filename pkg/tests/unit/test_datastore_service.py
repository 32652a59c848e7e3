import json

import numpy as np
import pytest

from src.core.exceptions import CorruptRecordError, DatastoreError, WeightsNotFoundError
from src.schemas.features import FlowFeatures, LinkFeatures
from src.schemas.records import LabeledRecord, TrafficRecord
from src.services.datastore_service import Datastore, RecordStore, WeightsStore
from src.services.vtwin import init_weights


def _features(length=2):
    return FlowFeatures(avg_traffic_rate=2e4, path_prop_delay=0.002, flow_length=length, avg_pkts_sent=5.0, avg_pkt_loss=0.0)


def traffic_record(flow_id, timestamp, phase=0):
    return TrafficRecord(
        flow_id=flow_id,
        timestamp=timestamp,
        snapshot_id=0,
        phase=phase,
        origin=0,
        destination=3,
        path=(1, 4),
        flow_features=_features(),
    )


def labeled_record(flow_id, timestamp, phase=0, y=0.01):
    return LabeledRecord(
        **traffic_record(flow_id, timestamp, phase).model_dump(),
        link_context=(LinkFeatures(capacity=1e6, load=0.2), LinkFeatures(capacity=2e6, load=0.4)),
        y=y,
    )


@pytest.fixture
def traffic_store(tmp_path):
    """Fixture com uma base de tráfego vazia."""
    return RecordStore(tmp_path / "traffic.jsonl", TrafficRecord, "traffic")


def test_append_and_scan(traffic_store):
    """Testa que os registros voltam em ordem de inserção e idênticos."""
    records = [traffic_record(i, float(i)) for i in range(5)]
    assert traffic_store.extend(records) == [0, 1, 2, 3, 4]
    assert traffic_store.append(traffic_record(5, 5.0)) == 5
    scanned = traffic_store.scan()
    assert scanned.records == records + [traffic_record(5, 5.0)]
    assert scanned.corrupt == []
    assert len(traffic_store) == 6


def test_header_written(traffic_store):
    """Testa o cabeçalho com schema, versão e unidades."""
    header = json.loads(traffic_store.path.read_text(encoding="utf-8").splitlines()[0])["header"]
    assert header["schema"] == "traffic"
    assert header["schema_version"] == 1
    assert header["units"]["avg_traffic_rate"] == "bit/s"


def test_scan_range(traffic_store):
    """Testa o filtro start <= timestamp < end."""
    traffic_store.extend([traffic_record(i, float(i)) for i in range(10)])
    assert [r.flow_id for r in traffic_store.scan(start=3.0, end=6.0).records] == [3, 4, 5]
    assert traffic_store.scan(start=20.0, end=30.0).records == []


def test_scan_predicate(traffic_store):
    """Testa o filtro por predicado."""
    traffic_store.extend([traffic_record(i, float(i), phase=i % 2) for i in range(6)])
    assert [r.flow_id for r in traffic_store.scan(predicate=lambda r: r.phase == 1).records] == [1, 3, 5]


def test_monotonic_timestamps(traffic_store):
    """Testa que timestamps fora de ordem são rejeitados."""
    traffic_store.append(traffic_record(0, 10.0))
    with pytest.raises(DatastoreError):
        traffic_store.append(traffic_record(1, 9.0))
    assert len(traffic_store) == 1


def test_wrong_record_type(traffic_store):
    """Testa a rejeição de registro de outro tipo."""
    with pytest.raises(DatastoreError):
        traffic_store.append({"flow_id": 1})


def test_corrupt_line_skipped(traffic_store):
    """Testa que linhas corrompidas são puladas e reportadas."""
    traffic_store.extend([traffic_record(i, float(i)) for i in range(3)])
    lines = traffic_store.path.read_text(encoding="utf-8").splitlines()
    tampered = json.loads(lines[2])
    tampered["record"]["flow_id"] = 99
    lines[2] = json.dumps(tampered)
    lines.append("{nao é json")
    traffic_store.path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    scanned = traffic_store.scan()
    assert [r.flow_id for r in scanned.records] == [0, 2]
    assert [c.line for c in scanned.corrupt] == [3, 5]


def test_reopen_keeps_position(tmp_path):
    """Testa que reabrir a base preserva contagem e último timestamp."""
    path = tmp_path / "traffic.jsonl"
    RecordStore(path, TrafficRecord, "traffic").extend([traffic_record(0, 1.0), traffic_record(1, 2.0)])
    reopened = RecordStore(path, TrafficRecord, "traffic")
    assert len(reopened) == 2
    with pytest.raises(DatastoreError):
        reopened.append(traffic_record(2, 1.5))


def test_schema_mismatch(tmp_path):
    """Testa o erro ao abrir uma base com outro schema."""
    path = tmp_path / "store.jsonl"
    RecordStore(path, TrafficRecord, "traffic")
    with pytest.raises(DatastoreError):
        RecordStore(path, LabeledRecord, "labeled")


def test_labeled_record_validation():
    """Testa que o rótulo não pode ser menor que a propagação do caminho."""
    with pytest.raises(ValueError):
        labeled_record(0, 0.0, y=0.001)


def test_labeled_for_phase(tmp_path):
    """Testa a leitura por fase: datasets primeiro, depois o fluxo operacional."""
    store = Datastore(tmp_path)
    store.datasets.extend([labeled_record(0, 5.0, phase=0), labeled_record(1, 1.0, phase=1)])
    store.labeled.extend([labeled_record(2, 3.0, phase=1), labeled_record(3, 4.0, phase=0)])
    assert [r.flow_id for r in store.labeled_for_phase(1)] == [1, 2]
    assert [r.flow_id for r in store.labeled_for_phase(None)] == [0, 1, 2, 3]
    assert store.labeled_for_phase(7) == []


@pytest.fixture
async def weights_store(tmp_path):
    store = WeightsStore(tmp_path / "weights")
    await store.init()
    yield store
    await store.close()


async def test_weights_roundtrip(weights_store):
    """Testa arquivamento e leitura bit a bit dos pesos."""
    w = init_weights(np.random.default_rng(0), m=4, n=4, K=1).copy(version=2)
    entry = await weights_store.save_weights(w, reason="initial")
    assert entry.version == 2
    assert entry.reason == "initial"
    assert len(entry.digest) == 64
    assert (await weights_store.load_weights(2)).same_as(w)
    assert await weights_store.has_version(2)
    assert not await weights_store.has_version(3)


async def test_weights_listing_order(weights_store):
    """Testa a listagem ordenada por versão."""
    for version in (3, 1, 2):
        await weights_store.save_weights(init_weights(np.random.default_rng(version), m=4, n=4, K=1).copy(version=version))
    assert await weights_store.versions() == [1, 2, 3]


async def test_weights_duplicate_version(weights_store):
    """Testa que uma versão não é gravada duas vezes."""
    w = init_weights(np.random.default_rng(0), m=4, n=4, K=1).copy(version=1)
    await weights_store.save_weights(w)
    with pytest.raises(DatastoreError):
        await weights_store.save_weights(w)


async def test_weights_missing_version(weights_store):
    """Testa o erro para versão inexistente."""
    with pytest.raises(WeightsNotFoundError):
        await weights_store.load_weights(42)


async def test_weights_tampered_file(weights_store):
    """Testa que um arquivo alterado falha na verificação de digest."""
    w = init_weights(np.random.default_rng(0), m=4, n=4, K=1).copy(version=1)
    entry = await weights_store.save_weights(w)
    with open(entry.path, "r+b") as fh:
        fh.seek(60)
        fh.write(b"\xff\xff")
    with pytest.raises(CorruptRecordError):
        await weights_store.load_weights(1)
