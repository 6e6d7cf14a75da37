"""Durable append-only persistence for runs.

Each run owns a directory of newline-delimited JSON streams plus a
manifest. Appends are serialized through the store instance, validated
against the stream schema, fsynced before acknowledgment, and guarded by
per-stream unique keys so resumed runs never duplicate work.

Layout: <root>/<run_id>/{run.json, manifest.json, candidates.jsonl,
plan.jsonl, verdicts.jsonl, annotations.jsonl, features.jsonl, reports/}.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, IO

from .errors import DuplicateKeyError, MissingStreamError, SchemaError, StoreError

logger = logging.getLogger(__name__)

Key = tuple


def _candidate_key(r: dict) -> Key:
    return (r["hs_id"], r["system_id"])


def _plan_key(r: dict) -> Key:
    return (r["id"],)


def _verdict_key(r: dict) -> Key:
    return (r["tournament_id"],)


def _annotation_key(r: dict) -> Key:
    return (r["tournament_id"], r["annotator_id"])


def _feature_key(r: dict) -> Key:
    return (r["hs_id"], r["system_id"], r["annotator_id"])


@dataclass(frozen=True)
class StreamSpec:
    required: tuple[str, ...]
    key: Callable[[dict], Key] | None = None
    supersedable: bool = False  # records with supersede=true may repeat keys


STREAMS: dict[str, StreamSpec] = {
    "candidates": StreamSpec(
        required=("id", "hs_id", "system_id", "text", "refusal_flag"),
        key=_candidate_key,
    ),
    "plan": StreamSpec(
        required=("id", "hs_id", "side_a", "side_b", "presentation_order"),
        key=_plan_key,
    ),
    "verdicts": StreamSpec(
        required=("tournament_id", "system_a", "system_b", "outcome", "parse_status"),
        key=_verdict_key,
    ),
    "annotations": StreamSpec(
        required=("tournament_id", "annotator_id", "choice", "timestamp"),
        key=_annotation_key,
        supersedable=True,
    ),
    "features": StreamSpec(
        required=("hs_id", "system_id", "annotator_id"),
        key=_feature_key,
        supersedable=True,
    ),
}


def config_hash(config_snapshot: dict) -> str:
    blob = json.dumps(config_snapshot, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class RunStore:
    """Append-only storage for one run directory."""

    def __init__(self, root: str | Path, run_id: str):
        self.run_id = run_id
        self.dir = Path(root) / run_id
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "reports").mkdir(exist_ok=True)
        self._lock = threading.Lock()
        self._handles: dict[str, IO[str]] = {}
        self._keys: dict[str, set[Key]] = {}

    # -- run metadata -------------------------------------------------

    def write_run_info(self, config_snapshot: dict, dataset_fingerprint: str | None = None,
                       versions: dict | None = None) -> None:
        info = {
            "run_id": self.run_id,
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "config_hash": config_hash(config_snapshot),
            "config": config_snapshot,
            "dataset_fingerprint": dataset_fingerprint,
            "versions": versions or {},
        }
        path = self.dir / "run.json"
        if not path.exists():
            self._atomic_write(path, json.dumps(info, indent=2, ensure_ascii=False))

    def load_run_info(self) -> dict:
        path = self.dir / "run.json"
        if not path.exists():
            raise MissingStreamError(f"run.json missing in {self.dir}")
        return json.loads(path.read_text(encoding="utf-8"))

    def finalize_manifest(self) -> dict:
        """Write the manifest listing every artifact and its record count.

        The manifest may only grow: rewriting is allowed while counts are
        monotonically non-decreasing (a pipeline stage adding artifacts),
        never when an acknowledged count would shrink.
        """
        artifacts = {}
        for name in sorted(STREAMS):
            path = self._path(name)
            if path.exists():
                artifacts[path.name] = len(self.load(name))
        manifest = {
            "run_id": self.run_id,
            "artifacts": artifacts,
        }
        try:
            info = self.load_run_info()
            manifest["created_at"] = info["created_at"]
            manifest["config_hash"] = info["config_hash"]
            manifest["dataset_fingerprint"] = info.get("dataset_fingerprint")
            manifest["versions"] = info.get("versions", {})
        except MissingStreamError:
            pass
        path = self.dir / "manifest.json"
        if path.exists():
            existing = json.loads(path.read_text(encoding="utf-8"))
            for filename, count in existing.get("artifacts", {}).items():
                if artifacts.get(filename, 0) < count:
                    raise StoreError(
                        f"manifest is immutable: {filename} would shrink from {count}"
                    )
        self._atomic_write(path, json.dumps(manifest, indent=2, ensure_ascii=False))
        return manifest

    def verify_manifest(self) -> None:
        path = self.dir / "manifest.json"
        if not path.exists():
            raise MissingStreamError(f"manifest.json missing in {self.dir}")
        manifest = json.loads(path.read_text(encoding="utf-8"))
        for filename, count in manifest["artifacts"].items():
            stream = filename.removesuffix(".jsonl")
            if not self._path(stream).exists():
                raise StoreError(f"manifest references missing artifact {filename}")
            actual = len(self.load(stream))
            if actual != count:
                raise StoreError(
                    f"artifact {filename} has {actual} records, manifest says {count}"
                )

    # -- streams --------------------------------------------------------

    def append(self, stream: str, record: dict, durable: bool = True) -> None:
        """Validate, persist, and acknowledge one record.

        The record is on disk (fsynced when durable) before this returns.
        Duplicate unique keys are rejected unless the stream is
        supersedable and the record carries supersede=true.
        """
        spec = self._spec(stream)
        for fieldname in spec.required:
            if fieldname not in record:
                raise SchemaError(f"{stream} record missing field", field=fieldname)
        with self._lock:
            keys = self._load_keys(stream)
            if spec.key is not None:
                key = spec.key(record)
                if key in keys and not (spec.supersedable and record.get("supersede")):
                    raise DuplicateKeyError(f"{stream} already has a record for key {key}")
                keys.add(key)
            handle = self._handle(stream)
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
            handle.flush()
            if durable:
                os.fsync(handle.fileno())

    def load(self, stream: str) -> list[dict]:
        """All records of a stream in append order.

        A torn trailing line (interrupted final write) is excluded with a
        warning; corruption anywhere else raises.
        """
        path = self._path(stream)
        if not path.exists():
            raise MissingStreamError(f"stream {stream!r} not found in {self.dir}")
        records = []
        with self._lock:
            for handle in self._handles.values():
                handle.flush()
        raw = path.read_text(encoding="utf-8")
        lines = raw.split("\n")
        trailing = lines.pop() if lines else ""  # text after the final newline
        for i, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise StoreError(f"{path.name} line {i} is corrupt: {exc.msg}") from exc
        if trailing.strip():
            logger.warning(
                "%s: dropping torn trailing line (%d bytes)", path.name, len(trailing)
            )
        return records

    def exists(self, stream: str) -> bool:
        return self._path(stream).exists()

    def keys(self, stream: str) -> set[Key]:
        """Unique keys already present (empty for a missing stream)."""
        with self._lock:
            return set(self._load_keys(stream))

    def count(self, stream: str) -> int:
        return len(self.load(stream)) if self.exists(stream) else 0

    # -- auxiliary documents ----------------------------------------------

    def write_doc(self, name: str, payload: dict) -> Path:
        """Atomic write of a JSON document in the run directory root."""
        path = self.dir / name
        self._atomic_write(path, json.dumps(payload, indent=2, ensure_ascii=False))
        return path

    def read_doc(self, name: str) -> dict:
        path = self.dir / name
        if not path.exists():
            raise MissingStreamError(f"document {name!r} not found in {self.dir}")
        return json.loads(path.read_text(encoding="utf-8"))

    def has_doc(self, name: str) -> bool:
        return (self.dir / name).exists()

    # -- reports ---------------------------------------------------------

    def write_report(self, name: str, payload: Any) -> Path:
        path = self.dir / "reports" / name
        if isinstance(payload, (dict, list)):
            body = json.dumps(payload, indent=2, ensure_ascii=False)
        else:
            body = str(payload)
        self._atomic_write(path, body)
        return path

    def read_report(self, name: str) -> Any:
        path = self.dir / "reports" / name
        if not path.exists():
            raise MissingStreamError(f"report {name!r} not found in {self.dir / 'reports'}")
        text = path.read_text(encoding="utf-8")
        return json.loads(text) if name.endswith(".json") else text

    def close(self) -> None:
        with self._lock:
            for handle in self._handles.values():
                handle.flush()
                os.fsync(handle.fileno())
                handle.close()
            self._handles.clear()

    def __enter__(self) -> "RunStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- internals ---------------------------------------------------------

    def _spec(self, stream: str) -> StreamSpec:
        try:
            return STREAMS[stream]
        except KeyError:
            raise MissingStreamError(f"unknown stream {stream!r}") from None

    def _path(self, stream: str) -> Path:
        return self.dir / f"{stream}.jsonl"

    def _handle(self, stream: str) -> IO[str]:
        if stream not in self._handles:
            self._handles[stream] = self._path(stream).open("a", encoding="utf-8")
        return self._handles[stream]

    def _load_keys(self, stream: str) -> set[Key]:
        if stream not in self._keys:
            spec = self._spec(stream)
            keys: set[Key] = set()
            if spec.key is not None and self._path(stream).exists():
                path = self._path(stream)
                for line in path.read_text(encoding="utf-8").split("\n"):
                    if not line.strip():
                        continue
                    try:
                        keys.add(spec.key(json.loads(line)))
                    except json.JSONDecodeError:
                        continue  # torn line; load() reports it
            self._keys[stream] = keys
        return self._keys[stream]

    @staticmethod
    def _atomic_write(path: Path, body: str) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(body, encoding="utf-8")
        os.replace(tmp, path)
