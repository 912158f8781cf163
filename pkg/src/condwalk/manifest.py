"""Run manifests: a seeded, serializable description of one experiment.

A manifest fully determines every random stream (master seed plus module,
replica and retry counters), so re-running it reproduces all data files
byte for byte.  Outputs are written atomically (temp file + rename) into a
per-run directory holding the manifest copy, a log, and the data; a
`.partial` marker guards interrupted runs.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

_KNOWN = {"potential", "walk", "bm", "couple", "kmt", "escape-stats", "validate"}


@dataclass
class RunManifest:
    subcommand: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    replicas: int = 1
    out: str | None = None
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "subcommand": self.subcommand,
            "seed": self.seed,
            "replicas": self.replicas,
            "out": self.out,
            "params": self.params,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RunManifest":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {data.get('schema_version')}")
        return cls(
            subcommand=data["subcommand"],
            params=dict(data.get("params", {})),
            seed=int(data.get("seed", 0)),
            replicas=int(data.get("replicas", 1)),
            out=data.get("out"),
        )


def validate_manifest(manifest: RunManifest) -> list[str]:
    """Parameter diagnostics; returned, never raised."""
    out: list[str] = []
    if manifest.subcommand not in _KNOWN:
        out.append(f"unknown subcommand {manifest.subcommand!r}")
    if manifest.replicas < 1:
        out.append("replicas must be >= 1")
    p = manifest.params
    beta = p.get("beta")
    alpha = p.get("alpha")
    if beta is not None and beta <= 8:
        out.append(f"beta={beta} <= 8: the per-level decoupling bounds need beta > 8")
    if alpha is not None and beta is not None and alpha <= 3 * (beta + 1):
        out.append(f"alpha={alpha} <= 3*(beta+1)={3 * (beta + 1):g}: "
                   "the eventual log-power bound needs alpha > 3(beta+1)")
    rho = p.get("rho")
    dt = p.get("dt")
    if rho is not None and dt is not None and dt > 1e-3 * rho ** 2:
        out.append(f"dt={dt} exceeds 1e-3*rho^2={1e-3 * rho ** 2:g}")
    horizon = p.get("horizon")
    if manifest.subcommand == "escape-stats" and horizon is not None:
        if p.get("lil", False) and horizon < 2 * 10_000_000:
            out.append(f"horizon={horizon} too small for the triple-log statistic "
                       "(needs >= 2e7)")
    return out


def atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path: str, data) -> None:
    atomic_write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


class RunDirectory:
    """Per-run output directory with a partial-run marker."""

    def __init__(self, path: str, manifest: RunManifest, force: bool = False):
        self.path = path
        self.manifest = manifest
        if os.path.exists(path):
            if not force and any(not f.startswith(".") for f in os.listdir(path)):
                raise FileExistsError(f"output directory {path!r} is not empty "
                                      "(use --force)")
        else:
            os.makedirs(path)
        self._marker = os.path.join(path, ".partial")

    def __enter__(self):
        with open(self._marker, "w") as f:
            f.write("run in progress\n")
        atomic_write_json(os.path.join(self.path, "manifest.json"),
                          self.manifest.to_json())
        return self

    def file(self, name: str) -> str:
        return os.path.join(self.path, name)

    def write_json(self, name: str, data) -> None:
        atomic_write_json(self.file(name), data)

    def write_csv(self, name: str, header: str, rows) -> None:
        lines = [header]
        for row in rows:
            lines.append(",".join(
                format(v, ".17g") if isinstance(v, float) else str(v) for v in row
            ))
        atomic_write_text(self.file(name), "\n".join(lines) + "\n")

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None and os.path.exists(self._marker):
            os.unlink(self._marker)
        return False
