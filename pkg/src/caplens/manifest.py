"""Run manifests: provenance for every CLI output directory.

A manifest records the command, its full configuration, all seeds, sha256
digests of the input files and the tool version. Re-running the same command
reproduces all outputs byte-identically; only the manifest timestamp
differs.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__

MANIFEST_NAME = "manifest.json"


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_run_manifest(
    out_dir: str | Path,
    command: str,
    config: Mapping[str, object],
    seeds: Mapping[str, int],
    inputs: Sequence[str | Path],
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "tool": "caplens",
        "tool_version": __version__,
        "command": command,
        "config": dict(config),
        "seeds": dict(seeds),
        "inputs": {
            str(path): _sha256(Path(path)) for path in inputs if Path(path).is_file()
        },
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = out_dir / MANIFEST_NAME
    with path.open("w", encoding="utf-8", newline="\n") as fp:
        json.dump(doc, fp, ensure_ascii=False, indent=2, sort_keys=True)
        fp.write("\n")
    return path
