"""
Flags and bookkeeping shared by every command.
"""

from pathlib import Path
from typing import Iterable, Optional
import argparse
import logging
import time

from app.core.artifacts import list_outputs, write_manifest
from app.core.config import Settings
from app.models.schemas import ProtocolName, Variant

logger = logging.getLogger(__name__)

CONFIG_DUMP = "config.env"


def common_parser() -> argparse.ArgumentParser:
    """Parent parser with the flags every subcommand accepts."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", type=Path, default=None, help="Key-value config file")
    parser.add_argument("--seed", type=int, default=None, help="Root seed (overrides SEED)")
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument("--jobs", type=int, default=None, help="Parallel workers (overrides N_JOBS)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override any setting")
    return parser


def add_protocol_arguments(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--protocol", required=required, choices=[p.value for p in ProtocolName])
    parser.add_argument("--variant", required=required, choices=[v.value for v in Variant])


def output_dir(args: argparse.Namespace, settings: Settings, command: str) -> Path:
    """--out, or <MDCSA_OUTPUT_ROOT>/<command>."""
    out = args.out if args.out is not None else Path(settings.MDCSA_OUTPUT_ROOT) / command
    out.mkdir(parents=True, exist_ok=True)
    return out


class CommandRun:
    """Times a command and writes its manifest and effective config on success."""

    def __init__(self, command: str, args: argparse.Namespace, settings: Settings):
        self.command = command
        self.args = args
        self.settings = settings
        self.started = time.perf_counter()

    def finish(self, out_dir: Path, inputs: Iterable[Path] = (), outputs: Optional[Iterable[Path]] = None) -> Path:
        self.settings.dump(Path(out_dir) / CONFIG_DUMP)
        return write_manifest(
            out_dir,
            command=self.command,
            seed=self.settings.SEED,
            inputs=list(inputs),
            outputs=list(outputs) if outputs is not None else list_outputs(out_dir),
            config_path=self.args.config,
            wall_clock_s=time.perf_counter() - self.started,
        )
