"""Local HTTP service exposing a live scene, versioned under /v1.

All scene mutations go through one lock so concurrent requests never
interleave inside a scene step; every JSON response carries the scene
clock. Controller runs and frame streams are sent as server-sent events.
Malformed requests return 422; domain errors return 409 with a
machine-readable ``{"error", "message", "clock"}`` payload.
"""

from __future__ import annotations

import asyncio
import json
import threading
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from . import __version__
from .chemistry import stock_reservoirs
from .controller import ControllerConfig, deposit, run_to_setpoint, trace_to_dict
from .errors import PhkitError, UnreachableSetpointError
from .materials import CalibrationSet
from .scene import Scene, apply_event, frame_to_dict, load_scenario, render_frame, step


class SetpointBody(BaseModel):
    target: float = Field(ge=0.0, le=14.0)
    tolerance: float = Field(default=0.1, gt=0.0)
    sigma: float = Field(default=0.05, ge=0.0)
    seed: int = 0


class DepositBody(BaseModel):
    mode: str
    targets: Optional[object] = None
    force: bool = False


class StepBody(BaseModel):
    dt: float = Field(gt=0.0)


class _State:
    """Live scene plus the last controller trace, guarded by one lock."""

    def __init__(self, scene: Scene):
        self.lock = threading.Lock()
        self.initial = scene
        self.scene = scene
        self.last_trace = None


def _scene_description(scene: Scene) -> dict:
    return {
        "name": scene.name,
        "width": scene.width,
        "height": scene.height,
        "clock": scene.clock,
        "cells": [
            [
                {
                    "method": cell.composite.method,
                    "parts": [kind for kind, _ in cell.composite.layers],
                    "cloaked": cell.cloaked,
                    "responsive": cell.responsive,
                    "thickness_factor": cell.thickness_factor,
                }
                for cell in row
            ]
            for row in scene.cells
        ],
        "hinges": [
            {"hinge_id": h.hinge_id, "cells": [list(c) for c in h.cells]} for h in scene.hinges
        ],
        "channels": [
            {
                "channel_id": sc.channel_id,
                "length_m": sc.channel.length,
                "n_cells": sc.channel.n_cells,
            }
            for sc in scene.channels
        ],
        "pending_events": len(scene.events),
        "version": __version__,
    }


def _sse(event: str, data: dict) -> str:
    return f"event: {event}\ndata: {json.dumps(data)}\n\n"


def create_app(
    scenario_source, calib: Optional[CalibrationSet] = None, stream_rate: float = 10.0
) -> FastAPI:
    scene = load_scenario(scenario_source, calib=calib)
    state = _State(scene)
    app = FastAPI(title="phkit", version=__version__)
    app.state.phkit = state

    @app.exception_handler(PhkitError)
    async def _domain_error(_request: Request, exc: PhkitError):
        return JSONResponse(
            status_code=409,
            content={
                "error": type(exc).__name__,
                "message": str(exc),
                "clock": state.scene.clock,
            },
        )

    @app.get("/v1/scene")
    def get_scene():
        with state.lock:
            return _scene_description(state.scene)

    @app.get("/v1/frame")
    def get_frame():
        with state.lock:
            frame = render_frame(state.scene)
            clock = state.scene.clock
        doc = frame_to_dict(frame)
        doc["clock"] = clock
        return doc

    @app.post("/v1/setpoint")
    def post_setpoint(body: SetpointBody):
        acid, base = stock_reservoirs()
        config = ControllerConfig(
            setpoint=body.target,
            tolerance=body.tolerance,
            sensor_noise_sigma=body.sigma,
            rng_seed=body.seed,
        )
        # the run itself is pure; only publishing the trace mutates state
        trace = run_to_setpoint(config, acid, base)

        def stream():
            for i, (ratio, true_ph, measured) in enumerate(trace.iterations):
                yield _sse(
                    "iteration",
                    {
                        "index": i,
                        "pump_ratio": ratio,
                        "true_ph": true_ph,
                        "measured_ph": measured,
                    },
                )
            with state.lock:
                if trace.converged:
                    state.last_trace = trace
                clock = state.scene.clock
            result = trace_to_dict(trace)
            result.pop("iterations", None)
            result["clock"] = clock
            yield _sse("result", result)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.post("/v1/deposit")
    def post_deposit(body: DepositBody):
        with state.lock:
            trace = state.last_trace
            if trace is None and not body.force:
                return JSONResponse(
                    status_code=409,
                    content={
                        "error": "DepositGuardError",
                        "message": "no converged setpoint run yet; converge or pass force",
                        "clock": state.scene.clock,
                    },
                )
            if trace is None:
                acid, _ = stock_reservoirs()
                from .controller import ControllerTrace

                trace = ControllerTrace(
                    iterations=(), converged=False, final_solution=acid,
                    setpoint=0.0, rng_seed=0,
                )
            targets = body.targets
            if isinstance(targets, list):
                targets = tuple(tuple(t) if isinstance(t, list) else t for t in targets)
            event = deposit(
                trace, body.mode, targets, time=state.scene.clock, force=body.force
            )
            state.scene = apply_event(state.scene, event)
            return {"deposited": True, "mode": body.mode, "clock": state.scene.clock}

    @app.post("/v1/step")
    def post_step(body: StepBody):
        with state.lock:
            state.scene = step(state.scene, body.dt)
            return {"clock": state.scene.clock}

    @app.post("/v1/reset")
    def post_reset():
        with state.lock:
            state.scene = state.initial
            state.last_trace = None
            return {"clock": state.scene.clock}

    @app.get("/v1/events")
    async def get_events(
        request: Request, rate: float = stream_rate, limit: Optional[int] = None
    ):
        if rate <= 0 or rate > 120:
            return JSONResponse(
                status_code=422,
                content={"error": "ValidationError", "message": "rate must be in (0, 120]"},
            )

        async def stream():
            period = 1.0 / rate
            sent = 0
            while limit is None or sent < limit:
                if await request.is_disconnected():
                    break
                with state.lock:
                    frame = render_frame(state.scene)
                    clock = state.scene.clock
                doc = frame_to_dict(frame)
                doc["clock"] = clock
                yield _sse("frame", doc)
                sent += 1
                if limit is None or sent < limit:
                    await asyncio.sleep(period)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
