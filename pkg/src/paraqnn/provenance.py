"""Provenance stamps embedded in manifests, checkpoints, and reports."""

from __future__ import annotations

import datetime
import hashlib
import json

from . import __version__


def config_hash(config) -> str:
    """Short stable digest of any JSON-serializable configuration."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def make_stamp(config, seeds) -> dict:
    return {
        "code_version": __version__,
        "config_hash": config_hash(config),
        "seeds": sorted(int(s) for s in seeds),
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def stamps_equivalent(a: dict, b: dict) -> bool:
    """Stamp equality modulo the creation timestamp."""
    keep = ("code_version", "config_hash", "seeds")
    return all(a.get(k) == b.get(k) for k in keep)


def require_stamp(obj: dict, what: str) -> dict:
    stamp = obj.get("stamp")
    if not isinstance(stamp, dict) or "code_version" not in stamp \
            or "config_hash" not in stamp or "seeds" not in stamp:
        raise ValueError(f"{what} has no provenance stamp; refusing to load")
    return stamp
