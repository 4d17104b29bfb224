"""Run manifests: written before any output, updated when stages finish."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import __version__


@dataclass
class RunManifest:
    """Config hash, code version, per-stage status and wall times.

    The manifest file is written (status=running) before the first output
    file is produced and rewritten after every stage transition, so no
    output can exist without a manifest referencing it.
    """

    path: str
    config_hash: str
    command: str
    stages: list = field(default_factory=list)   # (name, status, seconds)
    outputs: list = field(default_factory=list)
    _t0: float = field(default=0.0, repr=False)

    def begin(self, stage):
        self._t0 = time.perf_counter()
        self.stages.append([stage, "running", 0.0])
        self.write()

    def done(self, stage, status="ok"):
        for row in reversed(self.stages):
            if row[0] == stage:
                row[1] = status
                row[2] = time.perf_counter() - self._t0
                break
        self.write()

    def register_output(self, path):
        p = str(path)
        if p not in self.outputs:
            self.outputs.append(p)
        self.write()

    def write(self):
        lines = [
            f"config_hash = {self.config_hash}",
            f"code_version = {__version__}",
            f"command = {self.command}",
        ]
        for name, status, secs in self.stages:
            lines.append(f"stage {name} = {status} ({secs:.3f}s)")
        for out in self.outputs:
            lines.append(f"output = {out}")
        with open(self.path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
