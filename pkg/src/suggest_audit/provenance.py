"""Reproducibility helpers: seed fan-out, config hashing, output headers.

Every output file starts with a comment block recording the tool version,
a hash of the effective configuration and the master seed, so a run can be
reproduced byte-identically. Wall-clock fields are suppressed when
deterministic mode is on (``--deterministic`` or the
``SUGGEST_AUDIT_DETERMINISTIC=1`` environment variable).
"""

from __future__ import annotations

import hashlib
import json
import os
from datetime import datetime, timezone

from . import __version__

DETERMINISTIC_ENV = "SUGGEST_AUDIT_DETERMINISTIC"


def derive_seed(master_seed: int, label: str) -> int:
    """Fan a master seed out to a per-stage seed by hashing the stage label.

    Stable across platforms and runs; independent labels give independent
    streams.
    """
    digest = hashlib.sha256(f"{master_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def config_hash(config) -> str:
    """Short hex digest of a JSON-serializable configuration object."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def deterministic_mode(flag: bool | None = None) -> bool:
    if flag is not None:
        return flag
    return os.environ.get(DETERMINISTIC_ENV, "") == "1"


def header_lines(config=None, seed=None, deterministic: bool | None = None,
                 extra: dict | None = None) -> list[str]:
    """Build the provenance comment block for an output file (no newlines)."""
    lines = [f"# suggest-audit {__version__}"]
    if config is not None:
        lines.append(f"# config_hash={config_hash(config)}")
    if seed is not None:
        lines.append(f"# seed={seed}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key}={value}")
    if not deterministic_mode(deterministic):
        now = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        lines.append(f"# generated_at={now}")
    return lines


def meta_block(config=None, seed=None, deterministic: bool | None = None,
               extra: dict | None = None) -> dict:
    """Provenance dictionary embedded in JSON outputs."""
    meta = {"tool": "suggest-audit", "version": __version__}
    if config is not None:
        meta["config_hash"] = config_hash(config)
    if seed is not None:
        meta["seed"] = seed
    meta.update(extra or {})
    if not deterministic_mode(deterministic):
        meta["generated_at"] = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return meta
