"""Self-describing checkpoint container.

A zip archive holding ``meta.json`` (format version, model kind, config,
vocabulary, parameter names/shapes) plus one ``.npy`` member per parameter.
Entry timestamps are pinned so identical checkpoints are byte-identical, and
the file also opens with :func:`numpy.load`.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .diffcore import ParamRegistry

FORMAT_VERSION = "knowtrace-ckpt/1"
_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass
class Checkpoint:
    kind: str
    config: dict
    params: ParamRegistry
    vocab: Optional[Dict[int, int]] = None
    extra: dict = field(default_factory=dict)

    @property
    def n_questions(self) -> int:
        return int(self.config["n_questions"])


def _member(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    meta = {
        "format": FORMAT_VERSION,
        "kind": ckpt.kind,
        "config": ckpt.config,
        "vocab": None if ckpt.vocab is None else sorted([int(k), int(v)] for k, v in ckpt.vocab.items()),
        "params": [[name, list(ckpt.params[name].shape)] for name in ckpt.params],
        "extra": ckpt.extra,
    }
    with zipfile.ZipFile(path, "w") as zf:
        _member(zf, "meta.json", json.dumps(meta, sort_keys=True, indent=1).encode())
        for name in ckpt.params:
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(ckpt.params[name]), allow_pickle=False)
            _member(zf, f"{name}.npy", buf.getvalue())


def load_checkpoint(path) -> Checkpoint:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format {meta.get('format')!r}")
        reg = ParamRegistry()
        for name, shape in meta["params"]:
            arr = np.lib.format.read_array(io.BytesIO(zf.read(f"{name}.npy")), allow_pickle=False)
            if list(arr.shape) != shape:
                raise ValueError(f"parameter {name!r} has shape {arr.shape}, expected {shape}")
            reg.add(name, arr)
    vocab = None if meta["vocab"] is None else {k: v for k, v in meta["vocab"]}
    return Checkpoint(meta["kind"], meta["config"], reg, vocab, meta.get("extra", {}))
