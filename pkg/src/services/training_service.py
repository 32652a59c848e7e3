import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from src.core.exceptions import ModelError, TrainingDivergedError
from src.schemas.features import HeteroGraph
from src.schemas.training import EpochReport, TrainConfig, TrainingSummary
from src.schemas.vtwin import ModelWeights
from src.services.feature_service import disjoint_union, zscore_fit
from src.services.vtwin.autograd import Tensor, absolute, kink_trace, total
from src.services.vtwin.model import as_tensors, forward

logger = logging.getLogger(__name__)

EpochCallback = Callable[[EpochReport], None]


def mape(y, y_hat, floor: float = 1e-6) -> float:
    """(100/B) * soma |y - y_hat| / |y|, com |y| limitado inferiormente por `floor`."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.size == 0 or y.shape != y_hat.shape:
        raise ModelError(f"MAPE exige vetores alinhados não vazios ({y.shape}, {y_hat.shape})")
    denom = np.abs(y)
    clamped = int((denom < floor).sum())
    if clamped:
        logger.warning("MAPE: %d rótulos abaixo do piso %.1e foram limitados", clamped, floor)
    return float(100.0 * np.mean(np.abs(y - y_hat) / np.maximum(denom, floor)))


def _loss_coefficients(graphs: Sequence[HeteroGraph], floor: float) -> tuple[np.ndarray, np.ndarray, int]:
    """Rótulos do lote e pesos que tornam a perda a média dos MAPE por snapshot."""
    labels = np.concatenate([g.labels for g in graphs])
    sizes = np.concatenate([np.full(g.flow_count, g.flow_count, dtype=np.float64) for g in graphs])
    denom = np.abs(labels)
    clamped = int((denom < floor).sum())
    coef = 100.0 / (len(graphs) * sizes * np.maximum(denom, floor))
    return labels, coef, clamped


def batch_loss(graphs: Sequence[HeteroGraph], w: ModelWeights, p: Optional[Dict[str, Tensor]] = None, floor: float = 1e-6) -> Tensor:
    """Média, sobre os snapshots do lote, do MAPE de cada snapshot."""
    union = disjoint_union(graphs)
    labels, coef, _ = _loss_coefficients(graphs, floor)
    prediction = forward(union, w, p)
    return total(absolute(prediction - labels) * coef)


def mean_snapshot_mape(graphs: Sequence[HeteroGraph], w: ModelWeights, floor: float = 1e-6) -> Optional[float]:
    if not graphs:
        return None
    return float(np.mean([batch_loss([g], w, floor=floor).value for g in graphs]))


def calibrate_occupancy_scale(graphs: Sequence[HeteroGraph]) -> float:
    """Escala que leva a predição inicial (softplus ~ ln 2) à magnitude dos rótulos."""
    labels = np.concatenate([g.labels for g in graphs])
    inverse_capacity = np.concatenate(
        [np.array([sum(1.0 / g.capacities[j] for j in path) for path in g.paths]) for g in graphs]
    )
    return float(labels.mean() / (math.log(2.0) * inverse_capacity.mean()))


class Adam:
    def __init__(self, params: Dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = {name: np.zeros_like(value) for name, value in params.items()}
        self.v = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.cfg.beta1, self.cfg.beta2
        for name, value in params.items():
            g = grads[name]
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            m_hat = self.m[name] / (1.0 - b1**self.t)
            v_hat = self.v[name] / (1.0 - b2**self.t)
            value -= self.cfg.learning_rate * m_hat / (np.sqrt(v_hat) + self.cfg.adam_eps)


@dataclass
class TrainingResult:
    weights: ModelWeights
    history: List[float] = field(default_factory=list)
    validation_mape: Optional[float] = None
    train_snapshots: int = 0
    validation_snapshots: int = 0
    clamped_labels: int = 0

    def summary(self) -> TrainingSummary:
        return TrainingSummary(
            version=self.weights.version,
            epochs=len(self.history),
            history=self.history,
            validation_mape=self.validation_mape,
            train_snapshots=self.train_snapshots,
            validation_snapshots=self.validation_snapshots,
            clamped_labels=self.clamped_labels,
        )


def split_snapshots(graphs: Sequence[HeteroGraph], fraction: float, rng: np.random.Generator):
    order = rng.permutation(len(graphs))
    held_out = int(len(graphs) * fraction)
    validation = [graphs[i] for i in sorted(order[:held_out])]
    training = [graphs[i] for i in sorted(order[held_out:])]
    return training, validation


def train(
    w0: ModelWeights,
    data: Sequence[HeteroGraph],
    cfg: TrainConfig,
    on_epoch: Optional[EpochCallback] = None,
) -> TrainingResult:
    """
    Treina uma cópia de w0 sobre snapshots rotulados (MAPE + Adam).

    Normalização e escala de ocupação são ajustadas no split de treino quando w0
    ainda não as tem. A versão resultante é w0.version + 1.

    Raises:
        TrainingDivergedError: perda ou gradiente não finito; carrega os últimos pesos finitos.
    """
    graphs = [g for g in data if g.flow_count > 0 and g.labels is not None]
    if not graphs:
        raise ModelError("Treino exige ao menos um snapshot rotulado")
    rng = np.random.default_rng(cfg.seed)
    training, validation = split_snapshots(graphs, cfg.validation_fraction, rng)

    w = w0.copy(version=w0.version + 1)
    if w.stats is None:
        w = w.copy(stats=zscore_fit(training), occupancy_scale=calibrate_occupancy_scale(training))
        logger.info("Normalização ajustada em %d snapshots; escala de ocupação %.4g", len(training), w.occupancy_scale)

    clamped = sum(_loss_coefficients([g], cfg.label_floor)[2] for g in training)
    if clamped:
        logger.warning("%d rótulos abaixo do piso %.1e no conjunto de treino", clamped, cfg.label_floor)

    optimizer = Adam(w.params, cfg)
    history: List[float] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(training))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [training[i] for i in order[start : start + cfg.batch_size]]
            p = as_tensors(w)
            loss = batch_loss(batch, w, p, cfg.label_floor)
            value = float(loss.value)
            if not math.isfinite(value):
                raise TrainingDivergedError(
                    f"Perda não finita na época {epoch}", weights=w.copy(), history=history
                )
            loss.backward()
            grads = {name: (t.grad if t.grad is not None else np.zeros_like(t.value)) for name, t in p.items()}
            if not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingDivergedError(
                    f"Gradiente não finito na época {epoch}", weights=w.copy(), history=history
                )
            optimizer.step(w.params, grads)
            losses.append(value)
        epoch_loss = float(np.mean(losses))
        history.append(epoch_loss)
        logger.debug("Época %d: MAPE médio %.4f", epoch, epoch_loss)
        if on_epoch is not None:
            on_epoch(EpochReport(epoch=epoch, mean_loss=epoch_loss, batches=len(losses)))

    validation_mape = mean_snapshot_mape(validation, w, cfg.label_floor)
    logger.info(
        "Treino da versão %d concluído: MAPE final %s, validação %s",
        w.version,
        f"{history[-1]:.3f}" if history else "-",
        f"{validation_mape:.3f}" if validation_mape is not None else "-",
    )
    return TrainingResult(
        weights=w,
        history=history,
        validation_mape=validation_mape,
        train_snapshots=len(training),
        validation_snapshots=len(validation),
        clamped_labels=clamped,
    )


def gradient_check(
    w: ModelWeights,
    batch: Sequence[HeteroGraph],
    h: float = 1e-5,
    samples: int = 200,
    rng: Optional[np.random.Generator] = None,
    params: Optional[Sequence[str]] = None,
    skip_kinks: bool = True,
    floor: float = 1e-8,
) -> float:
    """
    Diferenças finitas centrais em parâmetros sorteados contra o gradiente analítico.

    Retorna max |g_fd - g| / max(|g_fd|, |g|, floor). Com `skip_kinks`, sondas cujo
    padrão de ativação (relu/abs) muda entre +h e -h são descartadas e substituídas.
    Com `floor` maior, gradientes pequenos passam a ser medidos em erro absoluto.
    """
    if not batch:
        raise ModelError("Verificação de gradiente exige ao menos um snapshot")
    rng = rng or np.random.default_rng(0)
    p = as_tensors(w)
    batch_loss(batch, w, p).backward()
    analytic = {name: (t.grad if t.grad is not None else np.zeros_like(t.value)) for name, t in p.items()}

    names = [name for name in w.params if params is None or name in params]
    candidates = [(name, i) for name in names for i in range(w.params[name].size)]
    order = rng.permutation(len(candidates))
    perturbed = w.copy()

    def evaluate(name: str, index: int, delta: float):
        flat = perturbed.params[name].reshape(-1)
        original = flat[index]
        flat[index] = original + delta
        with kink_trace() as trace:
            value = float(batch_loss(batch, perturbed).value)
        flat[index] = original
        return value, trace

    worst = 0.0
    checked = 0
    for k in order:
        if checked >= samples:
            break
        name, index = candidates[int(k)]
        plus, trace_plus = evaluate(name, index, h)
        minus, trace_minus = evaluate(name, index, -h)
        if skip_kinks and (
            len(trace_plus) != len(trace_minus)
            or any(not np.array_equal(a, b) for a, b in zip(trace_plus, trace_minus))
        ):
            continue
        fd = (plus - minus) / (2.0 * h)
        g = float(analytic[name].reshape(-1)[index])
        worst = max(worst, abs(fd - g) / max(abs(fd), abs(g), floor))
        checked += 1
    logger.debug("Verificação de gradiente: %d parâmetros, erro relativo máximo %.3e", checked, worst)
    return worst
