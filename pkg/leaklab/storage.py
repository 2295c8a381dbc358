"""
File formats shared by the CLI, the server and the attack pipeline.

Samples are JSONL with hex-encoded signature fields, keys and HNP instances are
JSON, reports are CSV and lattice bases are plain text matrices.
"""

import csv
import json
import logging
import platform
from datetime import datetime
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from leaklab import __version__
from leaklab.ec.curves import CurveParams, CurvePoint, p256
from leaklab.errors import ConfigError
from leaklab.schemas import HnpInstance, KeyPair, Signature, TimedSample

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


# ==================== JSON ====================

def load_json_file(file_path: PathLike, default: Any = None) -> Any:
    file_path = Path(file_path)
    if not file_path.exists():
        return default
    try:
        with open(file_path, "r") as f:
            return json.load(f)
    except json.JSONDecodeError:
        logger.error(f"Error parsing JSON file: {file_path}")
        return default


def save_json_file(file_path: PathLike, data: Any) -> None:
    file_path = Path(file_path)
    _ensure_parent(file_path)
    with open(file_path, "w") as f:
        json.dump(data, f, indent=2)


# ==================== SAMPLES ====================

def sample_to_record(sample: TimedSample) -> Dict[str, Any]:
    record: Dict[str, Any] = {
        "index": sample.index,
        "r": format(sample.signature.r, "x"),
        "s": format(sample.signature.s, "x"),
        "msg_hash": format(sample.signature.msg_hash, "x"),
        "cycles": sample.cycles,
    }
    if sample.lzb is not None:
        record["lzb"] = sample.lzb
    if sample.assumed_lzb is not None:
        record["assumed_lzb"] = sample.assumed_lzb
    return record


def record_to_sample(record: Dict[str, Any]) -> TimedSample:
    signature = Signature(
        r=int(record["r"], 16),
        s=int(record["s"], 16),
        msg_hash=int(record["msg_hash"], 16),
    )
    return TimedSample(
        signature=signature,
        cycles=record["cycles"],
        index=record.get("index", 0),
        lzb=record.get("lzb"),
        assumed_lzb=record.get("assumed_lzb"),
    )


def save_samples(samples: Iterable[TimedSample], path: PathLike) -> int:
    path = Path(path)
    _ensure_parent(path)
    count = 0
    with open(path, "w") as f:
        for sample in samples:
            f.write(json.dumps(sample_to_record(sample)) + "\n")
            count += 1
    logger.info(f"Wrote {count} samples to {path}")
    return count


def load_samples(path: PathLike, curve: Optional[CurveParams] = None) -> List[TimedSample]:
    """Read a JSONL sample file; signatures must be in range for curve (P-256 by default)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Sample file not found: {path}")
    n = (curve or p256()).n
    samples = []
    with open(path, "r") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                sample = record_to_sample(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as e:
                raise ConfigError(f"{path}:{line_no}: malformed sample ({e})") from e
            if not sample.signature.in_range(n):
                raise ConfigError(f"{path}:{line_no}: r or s is not below the group order")
            samples.append(sample)
    return samples


# ==================== KEYS ====================

def save_key(keypair: KeyPair, path: PathLike) -> None:
    save_json_file(path, {
        "curve": keypair.curve,
        "d": format(keypair.d, "x"),
        "qx": format(keypair.qx, "x"),
        "qy": format(keypair.qy, "x"),
    })


def load_key(path: PathLike) -> KeyPair:
    data = load_json_file(path)
    if data is None or "d" not in data:
        raise ConfigError(f"No private key in {path}")
    return KeyPair(
        curve=data["curve"],
        d=int(data["d"], 16),
        qx=int(data["qx"], 16),
        qy=int(data["qy"], 16),
    )


def save_public_key(curve_name: str, point: CurvePoint, path: PathLike) -> None:
    assert point.x is not None and point.y is not None
    save_json_file(path, {"curve": curve_name, "qx": format(point.x, "x"), "qy": format(point.y, "x")})


def load_public_key(path: PathLike) -> Tuple[str, CurvePoint]:
    data = load_json_file(path)
    if data is None or "qx" not in data:
        raise ConfigError(f"No public key in {path}")
    return data["curve"], CurvePoint(x=int(data["qx"], 16), y=int(data["qy"], 16))


# ==================== LATTICES ====================

def save_instance(instance: HnpInstance, path: PathLike) -> None:
    path = Path(path)
    _ensure_parent(path)
    path.write_text(instance.model_dump_json(indent=2))


def load_instance(path: PathLike) -> HnpInstance:
    return HnpInstance.model_validate_json(Path(path).read_text())


def save_basis(rows: Sequence[Sequence[int]], path: PathLike) -> None:
    path = Path(path)
    _ensure_parent(path)
    cols = len(rows[0]) if rows else 0
    with open(path, "w") as f:
        f.write(f"dim {len(rows)} {cols}\n")
        for row in rows:
            f.write(" ".join(str(value) for value in row) + "\n")


def load_basis(path: PathLike) -> List[List[int]]:
    lines = [line for line in Path(path).read_text().splitlines() if line.strip()]
    if not lines or not lines[0].startswith("dim "):
        raise ConfigError(f"{path}: missing 'dim <rows> <cols>' header")
    _, n_rows, n_cols = lines[0].split()
    rows = [[int(value) for value in line.split()] for line in lines[1:]]
    if len(rows) != int(n_rows) or any(len(row) != int(n_cols) for row in rows):
        raise ConfigError(f"{path}: matrix does not match its header")
    return rows


# ==================== REPORTS ====================

def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    path = Path(path)
    _ensure_parent(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Wrote {path}")


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with open(path, "r", newline="") as f:
        return list(csv.DictReader(f))


def package_versions() -> Dict[str, Optional[str]]:
    versions: Dict[str, Optional[str]] = {
        "leaklab": __version__,
        "python": platform.python_version(),
    }
    for package in ("numpy", "scipy", "pydantic", "fpylll"):
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = None
    return versions


def write_manifest(
    out_dir: PathLike,
    command: str,
    config: Dict[str, Any],
    seed: Optional[int] = None,
    name: str = "manifest.json",
) -> Path:
    """Record what produced the files in out_dir."""
    path = Path(out_dir) / name
    save_json_file(path, {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": package_versions(),
        "timestamp": datetime.now().isoformat(),
    })
    return path


def write_file_manifest(
    output: PathLike, command: str, config: Dict[str, Any], seed: Optional[int] = None
) -> Path:
    """Manifest for a single output file, written beside it as <stem>.manifest.json."""
    output = Path(output)
    return write_manifest(output.parent, command, config, seed, name=f"{output.stem}.manifest.json")
