"""Newline-delimited JSON readers and writers for the log files.

File layout of a logs directory:
    auction.ndjson  one auction record per line
    uts.ndjson      (tag_id, user_id) membership pairs
    urf.ndjson      (request_id, advertiser_id, pctr, pcvr) scores
    logs.json       small manifest: log_date, n_requests, sample_rate
world.json is written next to them by the world generator.

Readers validate per line and raise with the file name and 1-based line
number so malformed input is attributable.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterable, List, Optional

from ..errors import ParseError, RecordInvariantError, SchemaError
from .logs import AuctionRecord
from .world import World, world_from_dict, world_to_dict

AUCTION_FILE = "auction.ndjson"
UTS_FILE = "uts.ndjson"
URF_FILE = "urf.ndjson"
MANIFEST_FILE = "logs.json"
WORLD_FILE = "world.json"


@dataclass
class UtsRow:
    tag_id: str
    user_id: str


@dataclass
class UrfRow:
    request_id: str
    advertiser_id: str
    pctr: float
    pcvr: float


@dataclass
class LogManifest:
    log_date: str
    n_requests: int
    sample_rate: float
    seed: Optional[int] = None


def _load_lines(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: malformed JSON ({exc.msg})")
            if not isinstance(obj, dict):
                raise SchemaError(f"{path}:{lineno}: expected an object")
            yield lineno, obj


def _field(obj: dict, name: str, kind, path: str, lineno: int):
    if name not in obj:
        raise SchemaError(f"{path}:{lineno}: missing field {name!r}")
    value = obj[name]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise SchemaError(
            f"{path}:{lineno}: field {name!r} has type "
            f"{type(value).__name__}, expected {kind.__name__}")
    return value


def _write_ndjson(path: str, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, separators=(",", ":"), sort_keys=True))
            fh.write("\n")


def write_auction_log(path: str, records: Iterable[AuctionRecord]) -> None:
    _write_ndjson(path, (vars(r) for r in records))


def read_auction_log(path: str) -> List[AuctionRecord]:
    records = []
    for lineno, obj in _load_lines(path):
        rec = AuctionRecord(
            request_id=_field(obj, "request_id", str, path, lineno),
            user_id=_field(obj, "user_id", str, path, lineno),
            hour=_field(obj, "hour", int, path, lineno),
            area_id=_field(obj, "area_id", str, path, lineno),
            adzone_id=_field(obj, "adzone_id", str, path, lineno),
            winner=_field(obj, "winner", str, path, lineno),
            b1=_field(obj, "b1", float, path, lineno),
            b2=_field(obj, "b2", float, path, lineno),
            sampled=_field(obj, "sampled", bool, path, lineno),
        )
        if not 0 <= rec.hour <= 23:
            raise RecordInvariantError(
                f"{path}:{lineno}: hour {rec.hour} outside 0..23")
        if rec.b2 <= 0:
            raise RecordInvariantError(
                f"{path}:{lineno}: b2 must be positive, got {rec.b2}")
        if rec.b2 > rec.b1:
            raise RecordInvariantError(
                f"{path}:{lineno}: second price b2={rec.b2} exceeds b1={rec.b1}")
        records.append(rec)
    return records


def write_uts_log(path: str, rows: Iterable[UtsRow]) -> None:
    _write_ndjson(path, (vars(r) for r in rows))


def read_uts_log(path: str) -> List[UtsRow]:
    rows = []
    for lineno, obj in _load_lines(path):
        rows.append(UtsRow(
            tag_id=_field(obj, "tag_id", str, path, lineno),
            user_id=_field(obj, "user_id", str, path, lineno),
        ))
    return rows


def write_urf_log(path: str, rows: Iterable[UrfRow]) -> None:
    _write_ndjson(path, (vars(r) for r in rows))


def read_urf_log(path: str) -> List[UrfRow]:
    rows = []
    for lineno, obj in _load_lines(path):
        row = UrfRow(
            request_id=_field(obj, "request_id", str, path, lineno),
            advertiser_id=_field(obj, "advertiser_id", str, path, lineno),
            pctr=_field(obj, "pctr", float, path, lineno),
            pcvr=_field(obj, "pcvr", float, path, lineno),
        )
        if not (0.0 < row.pctr < 1.0 and 0.0 < row.pcvr < 1.0):
            raise RecordInvariantError(
                f"{path}:{lineno}: pctr/pcvr must lie in (0, 1)")
        rows.append(row)
    return rows


def uts_rows_from_world(world: World) -> List[UtsRow]:
    rows = []
    for tag_id in sorted(world.tags):
        for user_id in world.tags[tag_id]:
            rows.append(UtsRow(tag_id=tag_id, user_id=user_id))
    return rows


def write_manifest(path: str, manifest: LogManifest) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(vars(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path: str) -> LogManifest:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return LogManifest(
        log_date=str(obj.get("log_date", "unknown")),
        n_requests=int(obj.get("n_requests", 0)),
        sample_rate=float(obj.get("sample_rate", 1.0)),
        seed=obj.get("seed"),
    )


def write_world(path: str, world: World) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(world_to_dict(world), fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def read_world(path: str) -> World:
    with open(path, "r", encoding="utf-8") as fh:
        return world_from_dict(json.load(fh))


def logs_dir_paths(logs_dir: str) -> dict:
    return {
        "auction": os.path.join(logs_dir, AUCTION_FILE),
        "uts": os.path.join(logs_dir, UTS_FILE),
        "urf": os.path.join(logs_dir, URF_FILE),
        "manifest": os.path.join(logs_dir, MANIFEST_FILE),
    }
