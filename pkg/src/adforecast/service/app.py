"""Forecast service: criteria in, calibrated forecast out, under two seconds.

The service holds one immutable snapshot (log index, calibration model,
metadata). Requests read the snapshot reference once and never mutate it;
reloading builds a fresh snapshot and swaps the reference atomically, so a
response always reflects a single consistent (model_version, log_date) pair.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..calibrate.forecast import CalibModel, calibrate_forecast
from ..errors import AdforecastError, CriteriaError, DataIntegrityError
from ..replay.criteria import criteria_from_dict
from ..replay.engine import LogIndex, replay
from ..urf.model import UrfModel


@dataclass
class Snapshot:
    index: LogIndex
    model: CalibModel
    scale_factor: float
    log_date: str
    urf_version: str = ""

    @property
    def model_version(self) -> str:
        return self.model.version

    @property
    def record_count(self) -> int:
        return int(self.index.sampled.sum())


class ServiceState:
    """Mutable cell holding the current snapshot; swap is a single rebind."""

    def __init__(self) -> None:
        self.snapshot: Optional[Snapshot] = None

    def swap(self, snapshot: Snapshot) -> None:
        self.snapshot = snapshot


def load_snapshot(logs_dir: str, model_path: str,
                  urf_model_path: Optional[str] = None,
                  scale_factor: Optional[float] = None) -> Snapshot:
    """Build a snapshot from artifacts on disk.

    scale_factor defaults to 1/sample_rate from the logs manifest.
    """
    index = LogIndex.from_dir(logs_dir)
    model = CalibModel.load(model_path)
    urf_version = ""
    if urf_model_path:
        urf_version = UrfModel.load(urf_model_path).version
    if scale_factor is None:
        rate = index.manifest.sample_rate if index.manifest else 1.0
        scale_factor = 1.0 / rate if rate > 0 else 1.0
    log_date = index.manifest.log_date if index.manifest else "unknown"
    return Snapshot(index=index, model=model, scale_factor=scale_factor,
                    log_date=log_date, urf_version=urf_version)


def create_app(state: Optional[ServiceState] = None) -> FastAPI:
    state = state or ServiceState()
    app = FastAPI(title="adforecast", docs_url=None, redoc_url=None)
    app.state.service = state

    def _error(status: int, field: str, reason: str) -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"field": field, "reason": reason})

    @app.get("/health")
    def health():
        ready = state.snapshot is not None
        return {"status": "ready" if ready else "not_ready"}

    @app.get("/meta")
    def meta():
        snap = state.snapshot
        if snap is None:
            return _error(503, "", "service has no loaded snapshot")
        return {
            "log_date": snap.log_date,
            "record_count": snap.record_count,
            "model_version": snap.model_version,
            "scale_factor": snap.scale_factor,
            "urf_version": snap.urf_version,
        }

    @app.post("/forecast")
    async def forecast(request: Request):
        start = time.perf_counter()
        snap = state.snapshot
        if snap is None:
            return _error(503, "", "service has no loaded snapshot")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "", "request body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "", "request body must be a JSON object")
        try:
            criteria = criteria_from_dict(body)
            base = replay(criteria, snap.index, snap.scale_factor)
            calibrated = calibrate_forecast(snap.model, criteria, base)
        except CriteriaError as exc:
            return _error(400, exc.field, exc.reason)
        except DataIntegrityError as exc:
            return _error(400, "advertiser_id", str(exc))
        except AdforecastError as exc:
            return _error(500, "", str(exc))
        latency_ms = (time.perf_counter() - start) * 1000.0
        return {
            "calibrated": calibrated.to_dict(),
            "replay": base.to_dict(),
            "match_stats": vars(base.match_stats).copy(),
            "model_version": snap.model_version,
            "log_date": snap.log_date,
            "latency_ms": latency_ms,
        }

    return app


def serve(logs_dir: str, model_path: str, urf_model_path: Optional[str],
          port: int, scale_factor: Optional[float]) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    state = ServiceState()
    state.swap(load_snapshot(logs_dir, model_path, urf_model_path,
                             scale_factor))
    uvicorn.run(create_app(state), host="127.0.0.1", port=port,
                log_level="warning")
