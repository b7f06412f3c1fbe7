"""Result records, the on-disk cache, CSV export and config hashing."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def _version():
    from . import __version__
    return __version__


def _clean(obj):
    # JSON has no NaN/inf; store them as null so files stay standard
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(cfg) -> str:
    """SHA-256 of the sorted-key compact JSON form."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


@dataclass
class ResultRecord:
    config_hash: str
    operation: str
    payload: dict
    timing: float = 0.0
    version: str = field(default_factory=_version)
    schema: int = SCHEMA_VERSION

    def to_json(self):
        return {"schema": self.schema, "version": self.version, "config_hash": self.config_hash,
                "operation": self.operation, "payload": _clean(self.payload), "timing": self.timing}

    def to_line(self):
        return canonical_json(self.to_json())

    @classmethod
    def from_json(cls, d):
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported record schema {d.get('schema')!r}")
        return cls(d["config_hash"], d["operation"], d["payload"], float(d.get("timing", 0.0)),
                   d["version"], d["schema"])


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_records(path, records):
    atomic_write(path, "".join(r.to_line() + "\n" for r in records))


def read_records(path, strict=False):
    """Records from a JSON-lines file; malformed lines are skipped unless strict."""
    out = []
    path = Path(path)
    if not path.exists():
        return out
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(ResultRecord.from_json(json.loads(line)))
        except (ValueError, KeyError, TypeError):
            if strict:
                raise ValueError(f"{path}:{ln}: malformed record")
    return out


def default_cache_dir(override=None):
    env = os.environ.get("QUASILEVEL_CACHE")
    if env:
        return Path(env)
    if override:
        return Path(override)
    return Path.home() / ".cache" / "quasilevel"


class ResultCache:
    """Keyed records for one config hash, committed by atomic replace.

    Merging is by key and keeps the first record seen for a key, so it is
    idempotent and independent of arrival order for deterministic payloads.
    """

    def __init__(self, directory, chash, operation):
        self.path = Path(directory) / f"{operation}-{chash[:24]}.jsonl"
        self.chash = chash
        self.operation = operation
        self._lock = threading.Lock()
        self._records = {}
        for r in read_records(self.path):
            if r.config_hash == chash and r.operation == operation and "key" in r.payload:
                self._records.setdefault(r.payload["key"], r)

    def __contains__(self, key):
        return key in self._records

    def __len__(self):
        return len(self._records)

    def get(self, key):
        r = self._records.get(key)
        return None if r is None else r.payload

    def put(self, key, payload, timing=0.0):
        payload = dict(payload, key=key)
        with self._lock:
            self._records.setdefault(key, ResultRecord(self.chash, self.operation, payload, timing))

    def commit(self):
        with self._lock:
            recs = [self._records[k] for k in sorted(self._records)]
            write_records(self.path, recs)

    def clear(self):
        with self._lock:
            self._records.clear()
            if self.path.exists():
                self.path.unlink()


def to_csv(header, rows) -> str:
    """RFC 4180: CRLF line ends, minimal quoting with doubled quotes."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else _fmt(v) for v in r])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def read_csv(text):
    rows = list(csv.reader(io.StringIO(text, newline="")))
    return rows[0], rows[1:]
