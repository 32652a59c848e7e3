"""
Formato binário dos pesos do gêmeo virtual (little-endian):

    b"NDTW" | formato u16 | m u32 | n u32 | K u32 | versão u64 | escala f64
    | nº de camadas u32 | por camada: nome (u16 + utf-8), ndim u8, dims u32...
    | todos os parâmetros em f8, na ordem da tabela
    | flag u8 de Z-score | 14 x f8 (média/desvio de fluxo e de enlace)
"""

import struct
from typing import Dict, Tuple

import numpy as np

from src.core.exceptions import WeightsFormatError
from src.schemas.features import ZScoreStats
from src.schemas.vtwin import ModelWeights

MAGIC = b"NDTW"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHIIIQdI")


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def unpack(self, fmt: str) -> Tuple:
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.payload):
            raise WeightsFormatError(f"Payload truncado no byte {self.offset}")
        values = struct.unpack_from(fmt, self.payload, self.offset)
        self.offset += size
        return values

    def floats(self, count: int) -> np.ndarray:
        size = 8 * count
        if self.offset + size > len(self.payload):
            raise WeightsFormatError(f"Payload truncado no byte {self.offset}")
        values = np.frombuffer(self.payload, dtype="<f8", count=count, offset=self.offset).astype(np.float64)
        self.offset += size
        return values


def to_bytes(w: ModelWeights) -> bytes:
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, w.m, w.n, w.K, w.version, w.occupancy_scale, len(w.params))]
    for name, value in w.params.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(struct.pack("<B", value.ndim) + struct.pack(f"<{value.ndim}I", *value.shape))
    for value in w.params.values():
        parts.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    if w.stats is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<B", 1))
        stats = w.stats
        values = list(stats.flow_mean) + list(stats.flow_std) + list(stats.link_mean) + list(stats.link_std)
        parts.append(np.asarray(values, dtype="<f8").tobytes())
    return b"".join(parts)


def from_bytes(payload: bytes) -> ModelWeights:
    reader = _Reader(payload)
    magic, fmt, m, n, K, version, scale, layers = reader.unpack(_HEADER.format)
    if magic != MAGIC:
        raise WeightsFormatError(f"Assinatura inválida: {magic!r}")
    if fmt != FORMAT_VERSION:
        raise WeightsFormatError(f"Versão de formato não suportada: {fmt}")

    table: Dict[str, Tuple[int, ...]] = {}
    for _ in range(layers):
        (length,) = reader.unpack("<H")
        (raw,) = reader.unpack(f"<{length}s")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I") if ndim else ()
        try:
            name = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise WeightsFormatError(f"Nome de camada inválido: {raw!r}") from e
        table[name] = tuple(shape)

    params: Dict[str, np.ndarray] = {}
    for name, shape in table.items():
        count = int(np.prod(shape)) if shape else 1
        params[name] = reader.floats(count).reshape(shape)

    (has_stats,) = reader.unpack("<B")
    stats = None
    if has_stats:
        values = reader.floats(14)
        stats = ZScoreStats(
            flow_mean=tuple(float(v) for v in values[0:5]),
            flow_std=tuple(float(v) for v in values[5:10]),
            link_mean=tuple(float(v) for v in values[10:12]),
            link_std=tuple(float(v) for v in values[12:14]),
        )
    if reader.offset != len(payload):
        raise WeightsFormatError(f"{len(payload) - reader.offset} bytes excedentes após os pesos")
    return ModelWeights(params=params, m=m, n=n, K=K, stats=stats, occupancy_scale=scale, version=version)
