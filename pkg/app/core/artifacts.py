"""
Artifact file helpers.
Versioned comma-separated files, content hashes and run manifests.
"""

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union
from contextlib import contextmanager
import gzip
import hashlib
import io
import json
import logging
import zipfile

import numpy as np
import pandas as pd

from app.core.errors import MissingArtifactError
from app.models.schemas import FORMAT_VERSION, RunManifest

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
MANIFEST_NAME = "run_manifest.json"


def header_line(kind: str) -> str:
    return f"# mdcsa-{kind} v{FORMAT_VERSION}\n"


@contextmanager
def open_text(path: Path, mode: str):
    """Open a text file, transparently gzipped for `.gz` paths with a zero mtime."""
    if path.suffix != ".gz":
        with open(path, mode, newline="") as handle:
            yield handle
        return
    with gzip.GzipFile(path, mode + "b", mtime=0) as raw:
        with io.TextIOWrapper(raw, encoding="utf-8", newline="") as handle:
            yield handle


def write_table(df: pd.DataFrame, path: PathLike, kind: str, mode: str = "w") -> Path:
    """
    Write a comma-separated table behind a version header.
    Gzip-compressed when the path ends in `.gz`.

    Args:
        df: Rows to write
        path: Destination
        kind: Artifact kind named in the header
        mode: "w" to create, "a" to append rows without a header

    Returns:
        Path: The written file
    """
    path = Path(path)
    with open_text(path, mode) as handle:
        if mode == "w":
            handle.write(header_line(kind))
        df.to_csv(handle, index=False, header=(mode == "w"), lineterminator="\n")
    return path


def read_table(path: PathLike, kind: str, dtype=None) -> pd.DataFrame:
    """
    Read a table written by write_table, checking its version header.

    Args:
        path: Source file
        kind: Expected artifact kind
        dtype: Optional column dtypes

    Returns:
        pd.DataFrame: The rows, floats parsed losslessly
    """
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"Missing {kind} file: {path}")
    with open_text(path, "r") as handle:
        first = handle.readline()
        if first != header_line(kind):
            raise MissingArtifactError(f"{path} is not a v{FORMAT_VERSION} {kind} file (header {first.strip()!r})")
        return pd.read_csv(handle, dtype=dtype, float_precision="round_trip")


def content_hash(path: PathLike) -> str:
    """sha256 of a file, or of every file under a directory in sorted order."""
    path = Path(path)
    digest = hashlib.sha256()
    files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    for f in files:
        if f.name == MANIFEST_NAME:
            continue
        if path.is_dir():
            digest.update(str(f.relative_to(path)).encode("utf-8"))
        with open(f, "rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 20), b""):
                digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    out_dir: PathLike,
    command: str,
    seed: int,
    inputs: Iterable[PathLike] = (),
    outputs: Iterable[PathLike] = (),
    config_path: Optional[PathLike] = None,
    wall_clock_s: float = 0.0,
) -> Path:
    """
    Write the run manifest of a command into its output directory.
    Input directories that carry their own manifest are chained by path.

    Returns:
        Path: The manifest file
    """
    out_dir = Path(out_dir)
    input_paths = [Path(p) for p in inputs]
    manifest = RunManifest(
        command=command,
        config_path=str(config_path) if config_path else None,
        seed=seed,
        inputs={str(p): content_hash(p) for p in input_paths},
        input_manifests=[
            str(p / MANIFEST_NAME) for p in input_paths if p.is_dir() and (p / MANIFEST_NAME).is_file()
        ],
        outputs=sorted(str(Path(p)) for p in outputs),
        wall_clock_s=round(wall_clock_s, 3),
    )
    path = out_dir / MANIFEST_NAME
    path.write_text(manifest.model_dump_json(indent=2) + "\n")
    logger.info(f"Wrote manifest for '{command}' to {path}")
    return path


def read_manifest(directory: PathLike) -> RunManifest:
    """Load the run manifest that an upstream command left in `directory`."""
    path = Path(directory) / MANIFEST_NAME
    if not path.is_file():
        raise MissingArtifactError(f"Expected manifest {path}; run the upstream command first")
    return RunManifest.model_validate_json(path.read_text())


def list_outputs(directory: PathLike) -> List[Path]:
    directory = Path(directory)
    return sorted(p for p in directory.rglob("*") if p.is_file() and p.name != MANIFEST_NAME)


def write_npz(path: PathLike, header: dict, arrays: Dict[str, np.ndarray]) -> Path:
    """
    Write arrays plus a JSON header into a compressed npz archive.
    Zip entries carry a fixed timestamp so identical arrays give identical bytes.
    """
    path = Path(path)
    entries = {"header": np.array(json.dumps({"format_version": FORMAT_VERSION, **header}, sort_keys=True))}
    entries.update(arrays)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as archive:
        for name in sorted(entries):
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            with archive.open(info, "w", force_zip64=True) as handle:
                np.lib.format.write_array(handle, np.asarray(entries[name]), allow_pickle=False)
    return path


def read_npz(path: PathLike) -> Tuple[dict, Dict[str, np.ndarray]]:
    """Load an archive written by write_npz, checking its format version."""
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"Missing window file: {path}")
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format_version") != FORMAT_VERSION:
            raise MissingArtifactError(f"{path} has format version {header.get('format_version')}, expected {FORMAT_VERSION}")
        arrays = {name: data[name] for name in data.files if name != "header"}
    return header, arrays
