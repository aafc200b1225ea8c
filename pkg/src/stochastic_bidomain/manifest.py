# src/stochastic_bidomain/manifest.py - Run directories, manifests and atomic output writes.
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from . import __version__
from .bidomain_op import BidomainOperator

MANIFEST_NAME = "manifest.json"
REPORT_NAME = "report.json"
LEDGER_NAME = "ledger.csv"
REPLICAS_NAME = "replicas.csv"


@dataclass(frozen=True)
class RunPaths:
    run_dir: Path
    manifest_path: Path
    report_path: Path
    ledger_path: Path
    replicas_path: Path

    @classmethod
    def from_dir(cls, run_dir: Path | str) -> RunPaths:
        run_dir = Path(run_dir)
        return cls(
            run_dir=run_dir,
            manifest_path=run_dir / MANIFEST_NAME,
            report_path=run_dir / REPORT_NAME,
            ledger_path=run_dir / LEDGER_NAME,
            replicas_path=run_dir / REPLICAS_NAME,
        )

    @classmethod
    def create(cls, root: Path | str, seed: int, now: datetime | None = None) -> RunPaths:
        """<root>/<UTC timestamp>-seed<seed>, suffixed -1, -2, ... when the name is taken."""
        stamp = (now or datetime.now(timezone.utc)).strftime("%Y%m%dT%H%M%S%fZ")
        base = Path(root) / f"{stamp}-seed{seed}"
        candidate, n = base, 0
        while candidate.exists():
            n += 1
            candidate = base.with_name(f"{base.name}-{n}")
        candidate.mkdir(parents=True)
        return cls.from_dir(candidate)


# ---------------------------------------------------------------------
# Atomic writes
# ---------------------------------------------------------------------


def write_text_atomic(path: Path | str, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def dumps_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def write_json_atomic(path: Path | str, obj: Any) -> Path:
    return write_text_atomic(path, dumps_json(obj))


def write_csv_atomic(path: Path | str, df: pd.DataFrame) -> Path:
    return write_text_atomic(path, df.to_csv(index=False, lineterminator="\n"))


# ---------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------


def operator_fingerprint(operator: BidomainOperator, conductivity: dict[str, Any]) -> str:
    """sha256 over the grid, the conductivity echo and the eigenvalue bytes."""
    h = hashlib.sha256()
    h.update(json.dumps(operator.grid.to_dict(), sort_keys=True).encode())
    h.update(json.dumps(conductivity, sort_keys=True).encode())
    h.update(np.ascontiguousarray(operator.eigenvalues, dtype="<f8").tobytes())
    return h.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class RunManifest:
    command: list[str]
    config: dict[str, Any]
    seed: int
    fingerprint: str
    started: str = field(default_factory=_now)
    finished: str | None = None
    outputs: list[str] = field(default_factory=list)
    exit_code: int | None = None
    tool_version: str = __version__

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool_version": self.tool_version,
            "command": list(self.command),
            "config": self.config,
            "seed": self.seed,
            "operator_fingerprint": self.fingerprint,
            "started": self.started,
            "finished": self.finished,
            "outputs": list(self.outputs),
            "exit_code": self.exit_code,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunManifest:
        required = ("command", "config", "seed", "operator_fingerprint")
        missing = [k for k in required if k not in data]
        if missing:
            raise ValueError(f"Manifest missing keys: {missing}")
        return cls(
            command=list(data["command"]),
            config=dict(data["config"]),
            seed=int(data["seed"]),
            fingerprint=str(data["operator_fingerprint"]),
            started=str(data.get("started", "")),
            finished=data.get("finished"),
            outputs=list(data.get("outputs", [])),
            exit_code=data.get("exit_code"),
            tool_version=str(data.get("tool_version", "")),
        )

    def write(self, paths: RunPaths) -> Path:
        return write_json_atomic(paths.manifest_path, self.to_dict())

    def finalize(self, paths: RunPaths, outputs: list[Path], exit_code: int) -> RunManifest:
        done = replace(
            self,
            finished=_now(),
            outputs=sorted(p.name for p in outputs),
            exit_code=exit_code,
        )
        done.write(paths)
        return done


def read_manifest(path: Path | str) -> RunManifest:
    p = Path(path)
    if p.is_dir():
        p = p / MANIFEST_NAME
    if not p.exists():
        raise FileNotFoundError(f"Manifest not found: {p}")
    return RunManifest.from_dict(json.loads(p.read_text(encoding="utf-8")))


__all__ = [
    "RunPaths",
    "RunManifest",
    "write_text_atomic",
    "write_json_atomic",
    "write_csv_atomic",
    "dumps_json",
    "operator_fingerprint",
    "read_manifest",
]
