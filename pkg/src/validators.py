import math
import re
from pathlib import Path
from typing import Optional


def validate_finite(value: float) -> float:
    """Valida que o valor é um número finito (sem NaN/inf)."""
    if not math.isfinite(value):
        raise ValueError(f"Valor deve ser finito, recebido {value}")
    return value


def validate_finite_vector(values: list[float]) -> list[float]:
    for v in values:
        validate_finite(v)
    return values


def validate_probability(value: float) -> float:
    """Valida um nível de significância no intervalo aberto (0, 1)."""
    if not 0.0 < value < 1.0:
        raise ValueError(f"Significância deve estar em (0, 1), recebido {value}")
    return value


def validate_unit_interval(value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"Valor deve estar em [0, 1], recebido {value}")
    return value


def validate_existing_path(path: Optional[Path]) -> Optional[Path]:
    if path is None:
        return path
    if not Path(path).exists():
        raise ValueError(f"Arquivo não encontrado: {path}")
    return path


_DEFAULT_SCHEDULE = re.compile(r"^default:(\d+(\.\d+)?)$")


def validate_schedule_ref(ref: str) -> str:
    """Aceita `default:<segundos>` ou o caminho de um arquivo de cronograma."""
    match = _DEFAULT_SCHEDULE.match(ref)
    if match:
        if float(match.group(1)) <= 0:
            raise ValueError("Duração do cronograma padrão deve ser positiva")
        return ref
    if ref.startswith("default:"):
        raise ValueError(f"Cronograma padrão inválido: {ref}")
    validate_existing_path(Path(ref))
    return ref


def parse_schedule_ref(ref: str) -> Optional[float]:
    """Retorna a duração total de um `default:<segundos>`, ou None para arquivos."""
    match = _DEFAULT_SCHEDULE.match(ref)
    return float(match.group(1)) if match else None


def validate_window_sizes(raw: str) -> list[int]:
    """Converte a lista `a,b,c` da CLI em inteiros positivos (mínimo de dois)."""
    sizes = [int(part) for part in raw.split(",") if part.strip()]
    if len(sizes) < 2:
        raise ValueError("Informe ao menos dois tamanhos de janela")
    if any(s <= 0 for s in sizes):
        raise ValueError("Tamanhos de janela devem ser positivos")
    return sizes
