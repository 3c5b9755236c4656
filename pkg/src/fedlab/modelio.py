"""Checkpoint files and metadata sidecars.

Checkpoint layout (all integers little-endian)::

    offset 0   8 bytes   magic b"FEDLABCK"
    offset 8   4 bytes   uint32 manifest length M
    offset 12  M bytes   manifest: UTF-8 JSON, sorted keys, no whitespace
    offset 12+M          blob: element_count float32 values, canonical order

Manifest keys: ``format_version``, ``model_id``, ``layer_dims`` (list or
null), ``element_count``, ``dtype`` (always ``"float32-le"``) and
``checksum`` (``"crc32:<8 hex digits>"`` over the blob only).

A sidecar ``<stem>.meta.json`` sits next to ``<stem>.ckpt`` and carries the
genotype plus training provenance, linked to the checkpoint by its checksum.
"""

from __future__ import annotations

import json
import logging
import math
import os
import struct
import tempfile
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    ArchitectureMismatch,
    CorruptCheckpoint,
    DimensionError,
    EmptyPopulation,
    IoError,
    NumericError,
    VersionError,
)
from .evolution import Phenotype
from .fedsim.mlp import MlpModel
from .metrics import Genotype, MetricConfig, genotype_of

log = logging.getLogger(__name__)

MAGIC = b"FEDLABCK"
FORMAT_VERSION = 1
SIDECAR_VERSION = 1
CHECKPOINT_SUFFIX = ".ckpt"
SIDECAR_SUFFIX = ".meta.json"
_HEADER = struct.Struct("<8sI")


@dataclass
class CheckpointFile:
    manifest: dict
    blob: bytes

    def to_bytes(self) -> bytes:
        text = json.dumps(self.manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return _HEADER.pack(MAGIC, len(text)) + text + self.blob


@dataclass
class MetadataSidecar:
    sparsity: float
    stability: float
    stability_assumed: bool
    health: float
    sigma_target: float
    source_checksum: str
    accuracy: Optional[float] = None
    loss: Optional[float] = None
    epochs_trained: int = 0
    learning_rate: float = 0.001
    batch_size: int = 32
    optimizer: str = "adam"
    format_version: int = SIDECAR_VERSION
    # reserved for extra provenance; fedlab reads only "num_samples"
    extensions: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetadataSidecar":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise CorruptCheckpoint("sidecar is not a JSON object")
        version = data.get("format_version")
        if not isinstance(version, int):
            raise CorruptCheckpoint("sidecar lacks an integer format_version")
        if version > SIDECAR_VERSION:
            raise VersionError(f"sidecar format_version {version} is newer than {SIDECAR_VERSION}")
        names = set(cls.__dataclass_fields__)
        unknown = set(data) - names
        if unknown:
            raise CorruptCheckpoint(f"sidecar has unknown fields {sorted(unknown)}")
        try:
            side = cls(**data)
            side.genotype()
        except (TypeError, ValueError) as exc:
            raise CorruptCheckpoint(f"invalid sidecar: {exc}") from None
        return side

    def genotype(self) -> Genotype:
        return Genotype(
            sparsity=self.sparsity,
            stability=self.stability,
            health=self.health,
            stability_assumed=self.stability_assumed,
            accuracy=self.accuracy,
            loss=self.loss,
            epochs_trained=self.epochs_trained,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
        )


def sidecar_path(checkpoint_path) -> Path:
    p = Path(checkpoint_path)
    stem = p.name[: -len(CHECKPOINT_SUFFIX)] if p.name.endswith(CHECKPOINT_SUFFIX) else p.name
    return p.with_name(stem + SIDECAR_SUFFIX)


def _crc(blob: bytes) -> str:
    return f"crc32:{zlib.crc32(blob) & 0xFFFFFFFF:08x}"


def atomic_write(path, data: bytes, overwrite: bool = False) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    if path.exists() and not overwrite:
        raise IoError(f"{path} exists; pass overwrite to replace it")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def encode_checkpoint(w, arch: Optional[Sequence[int]], model_id: str) -> CheckpointFile:
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size == 0:
        raise DimensionError("cannot checkpoint an empty weight vector")
    if not np.all(np.isfinite(w)):
        raise NumericError("checkpoint weights must be finite")
    w32 = w.astype("<f4")
    if not np.all(np.isfinite(w32)):
        raise NumericError("weights overflow float32")
    if arch is not None:
        expected = MlpModel(arch).num_params
        if expected != w.size:
            raise DimensionError(f"layer dims {list(arch)} need {expected} weights, got {w.size}")
    blob = w32.tobytes()
    manifest = {
        "format_version": FORMAT_VERSION,
        "model_id": str(model_id),
        "layer_dims": [int(d) for d in arch] if arch is not None else None,
        "element_count": int(w.size),
        "dtype": "float32-le",
        "checksum": _crc(blob),
    }
    return CheckpointFile(manifest, blob)


def write_checkpoint(w, arch, model_id: str, path, overwrite: bool = False) -> CheckpointFile:
    ckpt = encode_checkpoint(w, arch, model_id)
    atomic_write(path, ckpt.to_bytes(), overwrite=overwrite)
    return ckpt


def decode_checkpoint(data: bytes, source: str = "<bytes>") -> tuple[np.ndarray, dict]:
    if len(data) < _HEADER.size:
        raise CorruptCheckpoint(f"{source}: file too short for a header")
    magic, mlen = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorruptCheckpoint(f"{source}: bad magic {magic!r}")
    end = _HEADER.size + mlen
    if len(data) < end:
        raise CorruptCheckpoint(f"{source}: manifest truncated")
    try:
        manifest = json.loads(data[_HEADER.size:end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"{source}: unreadable manifest ({exc})") from None
    if not isinstance(manifest, dict):
        raise CorruptCheckpoint(f"{source}: manifest is not an object")
    version = manifest.get("format_version")
    if not isinstance(version, int) or isinstance(version, bool):
        raise CorruptCheckpoint(f"{source}: manifest lacks an integer format_version")
    if version != FORMAT_VERSION:
        raise VersionError(f"{source}: checkpoint format_version {version} is not supported (this build reads {FORMAT_VERSION})")
    for key in ("model_id", "element_count", "dtype", "checksum", "layer_dims"):
        if key not in manifest:
            raise CorruptCheckpoint(f"{source}: manifest missing {key!r}")
    if manifest["dtype"] != "float32-le":
        raise CorruptCheckpoint(f"{source}: unsupported dtype {manifest['dtype']!r}")
    count = manifest["element_count"]
    if not isinstance(count, int) or count < 1:
        raise CorruptCheckpoint(f"{source}: invalid element_count {count!r}")
    blob = data[end:]
    if len(blob) != 4 * count:
        raise CorruptCheckpoint(f"{source}: blob holds {len(blob)} bytes, manifest says {4 * count}")
    if _crc(blob) != manifest["checksum"]:
        raise CorruptCheckpoint(f"{source}: checksum mismatch")
    w = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(w)):
        raise CorruptCheckpoint(f"{source}: non-finite weights")
    return w, manifest


def read_checkpoint(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return decode_checkpoint(data, str(path))


def read_sidecar(path) -> MetadataSidecar:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return MetadataSidecar.from_json(text)
    except json.JSONDecodeError as exc:
        raise CorruptCheckpoint(f"{path}: sidecar is not valid JSON ({exc})") from None


def build_sidecar(w_curr, w_prev, checksum: str, metric_cfg: MetricConfig,
                  training_meta: Optional[Mapping] = None) -> MetadataSidecar:
    meta = dict(training_meta or {})
    g = genotype_of(w_curr, w_prev, metric_cfg, meta)
    extensions = dict(meta.get("extensions") or {})
    if "num_samples" in meta:
        extensions["num_samples"] = int(meta["num_samples"])
    return MetadataSidecar(
        sparsity=g.sparsity,
        stability=g.stability,
        stability_assumed=g.stability_assumed,
        health=g.health,
        sigma_target=metric_cfg.sigma_target,
        source_checksum=checksum,
        accuracy=g.accuracy,
        loss=g.loss,
        epochs_trained=g.epochs_trained,
        learning_rate=g.learning_rate,
        batch_size=g.batch_size,
        optimizer=str(meta.get("optimizer", "adam")),
        extensions=extensions,
    )


def extract_metadata(
    curr_path,
    prev_path=None,
    metric_cfg: MetricConfig = MetricConfig(),
    training_meta: Optional[Mapping] = None,
    overwrite: bool = False,
) -> MetadataSidecar:
    """Compute the genotype of a checkpoint and write its sidecar.

    Nothing is written unless every read and metric succeeds.
    """
    w, manifest = read_checkpoint(curr_path)
    w_prev = None
    if prev_path is not None:
        w_prev, prev_manifest = read_checkpoint(prev_path)
        if prev_manifest["element_count"] != manifest["element_count"]:
            raise ArchitectureMismatch(
                f"{prev_path} has {prev_manifest['element_count']} weights, {curr_path} has {manifest['element_count']}"
            )
    side = build_sidecar(w, w_prev, manifest["checksum"], metric_cfg, training_meta)
    atomic_write(sidecar_path(curr_path), side.to_json().encode("utf-8"), overwrite=overwrite)
    return side


def write_model(w, arch, model_id: str, path, metric_cfg: MetricConfig = MetricConfig(),
                w_prev=None, training_meta: Optional[Mapping] = None,
                overwrite: bool = False) -> tuple[CheckpointFile, MetadataSidecar]:
    """Write a checkpoint together with its sidecar.

    Metrics are computed on the float32 values that actually land on disk.
    """
    ckpt = encode_checkpoint(w, arch, model_id)
    stored = np.frombuffer(ckpt.blob, dtype="<f4").astype(np.float64)
    prev = None if w_prev is None else np.asarray(w_prev, dtype=np.float32).astype(np.float64)
    side = build_sidecar(stored, prev, ckpt.manifest["checksum"], metric_cfg, training_meta)
    atomic_write(path, ckpt.to_bytes(), overwrite=overwrite)
    atomic_write(sidecar_path(path), side.to_json().encode("utf-8"), overwrite=overwrite)
    return ckpt, side


def ingest_population(directory, metric_cfg: MetricConfig = MetricConfig()) -> list[Phenotype]:
    """Load every ``*.ckpt`` in ``directory`` as a phenotype, sorted by model id.

    Missing or stale sidecars (checksum not matching the checkpoint) are
    regenerated with a warning.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise IoError(f"{directory} is not a directory")
    paths = sorted(directory.glob("*" + CHECKPOINT_SUFFIX))
    if not paths:
        raise EmptyPopulation(f"no checkpoints in {directory}")
    pop = []
    count = None
    for path in paths:
        w, manifest = read_checkpoint(path)
        if count is None:
            count = manifest["element_count"]
        elif manifest["element_count"] != count:
            raise ArchitectureMismatch(
                f"{path.name} has {manifest['element_count']} weights, expected {count}"
            )
        spath = sidecar_path(path)
        side = None
        if spath.exists():
            side = read_sidecar(spath)
            if side.source_checksum != manifest["checksum"]:
                log.warning("sidecar %s does not match %s; regenerating", spath.name, path.name)
                side = None
        else:
            log.warning("no sidecar for %s; regenerating", path.name)
        if side is None:
            side = extract_metadata(path, None, metric_cfg, overwrite=True)
        pop.append(Phenotype(
            id=str(manifest["model_id"]),
            weights=w,
            genotype=side.genotype(),
            num_samples=int(side.extensions.get("num_samples", 1)),
        ))
    pop.sort(key=lambda p: p.id)
    return pop


def manifest_layer_dims(manifest: Mapping) -> Optional[list[int]]:
    dims = manifest.get("layer_dims")
    return None if dims is None else [int(d) for d in dims]


def is_close_genotype(a: Genotype, b: Genotype, tol: float = 1e-9) -> bool:
    return all(math.isclose(x, y, rel_tol=0, abs_tol=tol) for x, y in zip(a.triple, b.triple))
