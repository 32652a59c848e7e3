"""
Bases do gêmeo: tráfego (features sem rótulo), rotulada (features + y) e
arquivo de pesos versionado.

As bases de registros são arquivos JSON por linha com um cabeçalho (schema,
versão, unidades); cada linha carrega o digest do registro. O arquivo de pesos
guarda o binário NDTW em disco e um índice SQL (SQLAlchemy assíncrono).
"""

import asyncio
import hashlib
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Generic, List, Optional, Type, TypeVar

from pydantic import BaseModel, ValidationError
from sqlalchemy import select

from database import create_engine_for, init_models, session_factory
from src.core.exceptions import CorruptRecordError, DatastoreError, WeightsNotFoundError
from src.models.weights_entry import WeightsEntryModel
from src.schemas.records import RECORD_SCHEMA_VERSION, CorruptLine, LabeledRecord, StoreHeader, TrafficRecord, WeightsEntry
from src.schemas.vtwin import ModelWeights
from src.services.vtwin.serialization import from_bytes, to_bytes

logger = logging.getLogger(__name__)

R = TypeVar("R", bound=BaseModel)


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def record_digest(payload: dict) -> str:
    return hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()[:16]


@dataclass
class ScanResult(Generic[R]):
    records: List[R] = field(default_factory=list)
    corrupt: List[CorruptLine] = field(default_factory=list)


class RecordStore(Generic[R]):
    """Base append-only em JSON por linha, com um escritor e leitores livres."""

    def __init__(self, path: Path | str, record_type: Type[R], schema_name: str, monotonic: bool = True):
        self.path = Path(path)
        self.monotonic = monotonic
        self.record_type = record_type
        self.schema_name = schema_name
        self._lock = threading.Lock()
        self._count = 0
        self._last_timestamp: Optional[float] = None
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists() and self.path.stat().st_size > 0:
            self._check_header()
            existing = self.scan()
            self._count = len(existing.records)
            if existing.records:
                self._last_timestamp = existing.records[-1].timestamp
        else:
            header = StoreHeader(schema=schema_name, schema_version=RECORD_SCHEMA_VERSION)
            with self.path.open("w", encoding="utf-8") as fh:
                fh.write(json.dumps({"header": header.model_dump(by_alias=True)}) + "\n")

    def _check_header(self) -> None:
        with self.path.open("r", encoding="utf-8") as fh:
            first = fh.readline()
        try:
            header = StoreHeader.model_validate(json.loads(first)["header"])
        except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as e:
            raise DatastoreError(f"Cabeçalho inválido em {self.path}: {e}") from e
        if header.schema_name != self.schema_name or header.schema_version != RECORD_SCHEMA_VERSION:
            raise DatastoreError(
                f"{self.path} tem schema {header.schema_name} v{header.schema_version}, "
                f"esperado {self.schema_name} v{RECORD_SCHEMA_VERSION}"
            )

    def __len__(self) -> int:
        return self._count

    def append(self, record: R) -> int:
        """Grava o registro de forma durável; retorna sua posição na base."""
        return self.extend([record])[0]

    def extend(self, records: List[R]) -> List[int]:
        """Grava um lote de registros com um único fsync."""
        with self._lock:
            last = self._last_timestamp
            lines = []
            for record in records:
                if not isinstance(record, self.record_type):
                    raise DatastoreError(
                        f"Registro do tipo {type(record).__name__} em base de {self.record_type.__name__}"
                    )
                timestamp = getattr(record, "timestamp", None)
                if self.monotonic and timestamp is not None and last is not None and timestamp < last:
                    raise DatastoreError(
                        f"Fluxo {getattr(record, 'flow_id', '?')}: timestamp {timestamp} anterior ao último "
                        f"registrado ({last}) em {self.path.name}"
                    )
                if timestamp is not None:
                    last = timestamp
                payload = record.model_dump(mode="json")
                lines.append(json.dumps({"digest": record_digest(payload), "record": payload}) + "\n")
            if not lines:
                return []
            with self.path.open("a", encoding="utf-8") as fh:
                fh.writelines(lines)
                fh.flush()
                os.fsync(fh.fileno())
            first = self._count
            self._count += len(lines)
            self._last_timestamp = last
            return list(range(first, self._count))

    def scan(
        self,
        start: Optional[float] = None,
        end: Optional[float] = None,
        predicate: Optional[Callable[[R], bool]] = None,
    ) -> ScanResult[R]:
        """
        Registros em ordem de inserção com start <= timestamp < end. Linhas
        corrompidas (parse ou digest) são puladas e reportadas.
        """
        result: ScanResult[R] = ScanResult()
        with self.path.open("r", encoding="utf-8") as fh:
            for number, raw in enumerate(fh, start=1):
                if number == 1 or not raw.strip():
                    continue
                try:
                    wrapped = json.loads(raw)
                    payload = wrapped["record"]
                    if record_digest(payload) != wrapped["digest"]:
                        raise CorruptRecordError("digest não confere")
                    record = self.record_type.model_validate(payload)
                except (json.JSONDecodeError, KeyError, TypeError, ValidationError, CorruptRecordError) as e:
                    reason = str(e).splitlines()[0] if str(e) else type(e).__name__
                    result.corrupt.append(CorruptLine(line=number, reason=reason))
                    continue
                timestamp = getattr(record, "timestamp", None)
                if start is not None and timestamp is not None and timestamp < start:
                    continue
                if end is not None and timestamp is not None and timestamp >= end:
                    continue
                if predicate is not None and not predicate(record):
                    continue
                result.records.append(record)
        if result.corrupt:
            logger.warning("%d linhas corrompidas ignoradas em %s", len(result.corrupt), self.path)
        return result


class WeightsStore:
    """Arquivo versionado de pesos: binário em disco + índice SQL."""

    def __init__(self, root: Path | str, db_url: Optional[str] = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        url = db_url or f"sqlite+aiosqlite:///{(self.root / 'weights.db').as_posix()}"
        self.engine = create_engine_for(url)
        self._sessions = session_factory(self.engine)
        self._ready = False

    async def init(self) -> None:
        if not self._ready:
            await init_models(self.engine)
            self._ready = True

    async def close(self) -> None:
        await self.engine.dispose()

    def _file_for(self, version: int) -> Path:
        return self.root / f"v{version:06d}.ndtw"

    @staticmethod
    def _write_atomic(path: Path, payload: bytes) -> None:
        tmp = path.with_suffix(".tmp")
        with tmp.open("wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    async def save_weights(self, w: ModelWeights, reason: Optional[str] = None) -> WeightsEntry:
        await self.init()
        payload = to_bytes(w)
        digest = hashlib.sha256(payload).hexdigest()
        path = self._file_for(w.version)
        async with self._sessions() as session:
            existing = await session.execute(select(WeightsEntryModel).where(WeightsEntryModel.version == w.version))
            if existing.scalar_one_or_none() is not None:
                raise DatastoreError(f"Versão {w.version} já está no arquivo de pesos")
            await asyncio.to_thread(self._write_atomic, path, payload)
            row = WeightsEntryModel(
                version=w.version, digest=digest, path=str(path), size_bytes=len(payload), reason=reason
            )
            session.add(row)
            await session.commit()
            await session.refresh(row)
        logger.info("Pesos da versão %d arquivados (%d bytes)", w.version, len(payload))
        return WeightsEntry.model_validate(row)

    async def get_entry(self, version: int) -> WeightsEntry:
        await self.init()
        async with self._sessions() as session:
            result = await session.execute(select(WeightsEntryModel).where(WeightsEntryModel.version == version))
            row = result.scalar_one_or_none()
        if row is None:
            raise WeightsNotFoundError(f"Versão {version} não encontrada no arquivo de pesos")
        return WeightsEntry.model_validate(row)

    async def load_weights(self, version: int) -> ModelWeights:
        entry = await self.get_entry(version)
        path = Path(entry.path)
        if not path.exists():
            raise CorruptRecordError(f"Arquivo da versão {version} ausente: {path}")
        payload = await asyncio.to_thread(path.read_bytes)
        if hashlib.sha256(payload).hexdigest() != entry.digest:
            raise CorruptRecordError(f"Digest da versão {version} não confere")
        weights = from_bytes(payload)
        if weights.version != version:
            raise CorruptRecordError(f"Arquivo da versão {version} contém a versão {weights.version}")
        return weights

    async def list_entries(self) -> List[WeightsEntry]:
        await self.init()
        async with self._sessions() as session:
            result = await session.execute(select(WeightsEntryModel).order_by(WeightsEntryModel.version))
            return [WeightsEntry.model_validate(row) for row in result.scalars().all()]

    async def versions(self) -> List[int]:
        return [entry.version for entry in await self.list_entries()]

    async def has_version(self, version: int) -> bool:
        try:
            await self.get_entry(version)
        except WeightsNotFoundError:
            return False
        return True


class Datastore:
    """
    As bases de um diretório de execução. A base rotulada tem dois arquivos:
    os registros do fluxo operacional e os datasets pré-coletados por padrão de
    tráfego (cada dataset com o seu próprio eixo de tempo).
    """

    def __init__(self, root: Path | str, db_url: Optional[str] = None):
        self.root = Path(root)
        self.traffic: RecordStore[TrafficRecord] = RecordStore(self.root / "traffic.jsonl", TrafficRecord, "traffic")
        self.labeled: RecordStore[LabeledRecord] = RecordStore(self.root / "labeled.jsonl", LabeledRecord, "labeled")
        self.datasets: RecordStore[LabeledRecord] = RecordStore(
            self.root / "labeled_datasets.jsonl", LabeledRecord, "labeled", monotonic=False
        )
        self.weights = WeightsStore(self.root / "weights", db_url)

    def labeled_for_phase(self, phase: Optional[int]) -> List[LabeledRecord]:
        """Registros rotulados de uma fase (ou todos, com phase=None): datasets e depois o fluxo."""
        predicate = None if phase is None else (lambda r: r.phase == phase)
        return self.datasets.scan(predicate=predicate).records + self.labeled.scan(predicate=predicate).records

    async def close(self) -> None:
        await self.weights.close()
