"""
Linha de comando do gêmeo digital.

    ndtwin run   --topology data/topologies/synthetic8.json --schedule default:400 --compare --out data/run
    ndtwin sweep --window-sizes 60,120,300,600,1200 --out data/run
    ndtwin serve --port 8000
"""

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from src.core.config import settings
from src.core.exceptions import NdtError
from src.core.logging import configure_logging
from src.schemas.drift import KswinConfig
from src.schemas.evaluation import SlaPolicy
from src.schemas.run import RunConfig
from src.schemas.training import TrainConfig
from src.services.scenario_service import run_scenario, window_sweep
from src.validators import validate_window_sizes

logger = logging.getLogger("ndtwin.cli")


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("use on ou off")
    return value == "on"


def _window_sizes(value: str) -> List[int]:
    try:
        return validate_window_sizes(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--topology", type=Path, default=Path(settings.DEFAULT_TOPOLOGY), help="arquivo de topologia")
    parser.add_argument("--schedule", default=settings.DEFAULT_SCHEDULE, help="arquivo de cronograma ou default:<segundos>")
    parser.add_argument("--seed", type=int, default=settings.SEED)
    parser.add_argument("--sync", type=_on_off, default=True, metavar="on|off", help="gatilho de retreino")
    parser.add_argument("--compare", action="store_true", help="calcula também a série do modelo congelado")
    parser.add_argument("--alpha", type=float, default=settings.KSWIN_ALPHA, help="significância do KSWIN")
    parser.add_argument("--window-size", type=int, default=settings.KSWIN_WINDOW, help="janela w do KSWIN (amostras)")
    parser.add_argument("--stat-size", type=int, default=settings.KSWIN_STAT_SIZE, help="buffer r do KSWIN (amostras)")
    parser.add_argument("--epochs", type=int, default=settings.TRAIN_EPOCHS)
    parser.add_argument("--lr", type=float, default=settings.TRAIN_LR)
    parser.add_argument("--batch-size", type=int, default=settings.TRAIN_BATCH_SIZE, help="snapshots por lote")
    parser.add_argument("--pdb-beta", type=float, default=settings.PDB_BETA)
    parser.add_argument("--pdb-floor", type=float, default=settings.PDB_FLOOR_S, help="piso do PDB (s)")
    parser.add_argument("--flows-per-second", type=float, default=settings.FLOWS_PER_SECOND)
    parser.add_argument("--out", type=Path, default=Path(settings.DATA_DIR), help="diretório de saída")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ndtwin", description="Gêmeo digital de rede auto-adaptativo")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="executa o cenário de laço fechado")
    _add_run_options(run)

    sweep = commands.add_parser("sweep", help="detecções em função do tamanho da janela")
    _add_run_options(sweep)
    sweep.add_argument("--window-sizes", type=_window_sizes, required=True, help="lista a,b,c de tamanhos de janela")

    serve = commands.add_parser("serve", help="sobe a API do VTwin implantado")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        topology=args.topology,
        schedule=args.schedule,
        seed=args.seed,
        sync=args.sync,
        compare=args.compare,
        kswin=KswinConfig(alpha=args.alpha, window_size=args.window_size, stat_size=args.stat_size, seed=args.seed),
        train=TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed),
        pdb=SlaPolicy(beta=args.pdb_beta, floor=args.pdb_floor),
        out=args.out,
        flows_per_second=args.flows_per_second,
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    if args.command == "serve":
        import uvicorn

        uvicorn.run("app.main:app", host=args.host, port=args.port)
        return 0

    try:
        cfg = build_config(args)
    except ValidationError as e:
        logger.error("Configuração inválida:\n%s", e)
        return 2

    try:
        if args.command == "sweep":
            rows = window_sweep(cfg, args.window_sizes)
            for row in rows:
                print(f"w={row.window_size:6d}  detecções={row.detections}")
            return 0
        summary = asyncio.run(run_scenario(cfg))
    except NdtError as e:
        logger.error("%s", e)
        return 1

    print(
        f"{summary.flows} fluxos, {summary.detections} derivas, {summary.retrains} retreinos, "
        f"versões {summary.deployed_versions}; resultados em {cfg.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
