"""Artifact files: atomic writes, run manifests, marginals JSONL."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .model import Bn2oNetwork
from .sampler import BenchmarkSet


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    seed: int | None
    inputs: dict = field(default_factory=dict)  # path -> sha256
    version: str = __version__
    duration_s: float = 0.0
    started: float = field(default_factory=time.time)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def write_beside(self, out_path) -> Path:
        self.duration_s = time.time() - self.started
        path = Path(str(out_path) + ".manifest.json")
        doc = {
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "version": self.version,
            "duration_s": round(self.duration_s, 3),
        }
        atomic_write(path, json.dumps(doc, sort_keys=True, indent=1, default=str) + "\n")
        return path


def load_network(path) -> Bn2oNetwork:
    return Bn2oNetwork.from_json(Path(path).read_text())


def load_benchmark(path, net: Bn2oNetwork) -> BenchmarkSet:
    return BenchmarkSet.from_jsonl(Path(path).read_text(), net)


def marginals_line(case_id: int, method: str, z, **extra) -> str:
    doc = {"id": int(case_id), "method": method,
           "z": None if z is None else [float(x) for x in np.asarray(z)]}
    for key, value in extra.items():
        doc[key] = value.item() if isinstance(value, np.generic) else value
    return json.dumps(doc, separators=(",", ":"))


def read_marginals(path) -> tuple[str, dict]:
    """Returns (method label, {case id: z array or None})."""
    method, table = None, {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        method = method or doc.get("method") or Path(path).stem
        table[doc["id"]] = None if doc["z"] is None else np.asarray(doc["z"], dtype=float)
    return method or Path(path).stem, table
