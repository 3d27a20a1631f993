"""Single-file checkpoints.

The file is one line of JSON (the manifest), a newline, then every array as
little-endian float64 in manifest order. Each manifest block carries its name,
shape and byte offset into the blob. Integer and boolean arrays round-trip
through float64 exactly.
"""
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from epo.exceptions import CheckpointError
from epo.models.models import TrainConfig

logger = logging.getLogger(__name__)

FORMAT = "epo-checkpoint"
FORMAT_VERSION = 1
BLOB_DTYPE = np.dtype("<f8")


@dataclass(eq=False)
class CheckpointData:
    path: str
    manifest: dict
    arrays: Dict[str, np.ndarray]

    @property
    def config(self) -> TrainConfig:
        return TrainConfig.model_validate(self.manifest["config"])

    @property
    def scalars(self) -> dict:
        return self.manifest.get("scalars", {})


def write_checkpoint(path, manifest: dict, arrays: List[Tuple[str, np.ndarray]]) -> Path:
    path = Path(path)
    blocks = []
    offset = 0
    for name, array in arrays:
        array = np.asarray(array)
        blocks.append({"name": name, "shape": list(array.shape), "offset": offset})
        offset += array.size * BLOB_DTYPE.itemsize
    header = dict(manifest, format=FORMAT, format_version=FORMAT_VERSION, blocks=blocks, blob_bytes=offset)

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(json.dumps(header).encode("utf-8"))
        f.write(b"\n")
        for _, array in arrays:
            f.write(np.ascontiguousarray(array, dtype=BLOB_DTYPE).tobytes())
    os.replace(tmp, path)
    logger.info(f"Wrote checkpoint {path} ({offset} bytes of arrays)")
    return path


def load_checkpoint(path) -> CheckpointData:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(path, "no such file")
    raw = path.read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise CheckpointError(path, "missing manifest line")
    try:
        manifest = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(path, f"unreadable manifest: {e}")
    if manifest.get("format") != FORMAT:
        raise CheckpointError(path, "not a checkpoint file")

    blob = raw[newline + 1:]
    blocks = manifest.get("blocks", [])
    expected = sum(int(np.prod(b["shape"], dtype=np.int64)) for b in blocks) * BLOB_DTYPE.itemsize
    if len(blob) != expected or manifest.get("blob_bytes") != expected:
        raise CheckpointError(path, f"blob holds {len(blob)} bytes, manifest describes {expected}")

    arrays = {}
    for block in blocks:
        count = int(np.prod(block["shape"], dtype=np.int64))
        start = block["offset"]
        if start + count * BLOB_DTYPE.itemsize > len(blob):
            raise CheckpointError(path, f"block {block['name']} runs past the blob")
        values = np.frombuffer(blob, dtype=BLOB_DTYPE, count=count, offset=start)
        arrays[block["name"]] = values.astype(np.float64).reshape(block["shape"])
    return CheckpointData(path=str(path), manifest=manifest, arrays=arrays)


def save_checkpoint(trainer, path) -> Path:
    """Write the trainer's full resumable state"""
    manifest, arrays = trainer.checkpoint_state()
    return write_checkpoint(path, manifest, arrays)
