"""Spatial-temporal orchestration: a grid of material cells plus channels.

A Scene is an immutable value; ``step`` returns a new Scene with the clock
advanced, due deposition events consumed, cell states relaxed (with time
constants scaled by each cell's thickness factor), and embedded channels
diffused. ``render_frame`` is a pure read.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from . import fluidics, materials
from .chemistry import Solution, equilibrium_ph, solution_from_dict
from .controller import DepositionEvent
from .errors import ScenarioError
from .materials import CalibrationSet, Composite, make_composite

SCENARIO_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Cell:
    composite: Composite
    states: tuple  # one primitive state per composite layer
    cloaked: bool = False
    thickness_factor: float = 1.0
    responsive: bool = True


@dataclass(frozen=True)
class Hinge:
    hinge_id: str
    cells: tuple[tuple[int, int], ...]  # (x, y) grid coordinates


@dataclass(frozen=True)
class SceneChannel:
    channel_id: str
    channel: fluidics.Channel
    lining: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class Scene:
    name: str
    width: int
    height: int
    cells: tuple[tuple[Cell, ...], ...]  # rows (y) of cells (x)
    hinges: tuple[Hinge, ...]
    channels: tuple[SceneChannel, ...]
    events: tuple[DepositionEvent, ...]  # pending, sorted by time
    clock: float
    calib: CalibrationSet
    warnings: tuple[str, ...] = ()

    def cell(self, x: int, y: int) -> Cell:
        return self.cells[y][x]


@dataclass(frozen=True)
class Frame:
    time: float
    color_grid: tuple  # rows of Lab triples or None (no color layer)
    angle_list: tuple[tuple[str, float], ...]  # (hinge id, degrees)
    odor_field: tuple  # rows of floats
    aggregate_odor: float


# --------------------------------------------------------------------------
# scenario loading


def _req(doc: dict, key: str, path: str):
    if key not in doc:
        raise ScenarioError(f"{path}.{key}", "missing required field")
    return doc[key]


def _build_composite(spec: dict, calib: CalibrationSet, path: str) -> Composite:
    method = _req(spec, "method", path)
    parts = _req(spec, "parts", path)
    if not isinstance(parts, list) or not parts:
        raise ScenarioError(f"{path}.parts", "must be a non-empty list of primitive kinds")
    for kind in parts:
        if kind not in materials.PRIMITIVE_KINDS:
            raise ScenarioError(f"{path}.parts", f"unknown primitive kind: {kind!r}")
    try:
        return make_composite([(kind, calib) for kind in parts], method)
    except Exception as exc:
        raise ScenarioError(path, str(exc)) from exc


def _fresh_cell(composite: Composite, calib: CalibrationSet, **kw) -> Cell:
    states = tuple(materials.fresh_state(kind, calib) for kind, _ in composite.layers)
    return Cell(composite=composite, states=states, **kw)


def _parse_solution(spec: dict, path: str) -> Solution:
    try:
        return solution_from_dict(spec)
    except Exception as exc:
        raise ScenarioError(path, str(exc)) from exc


def load_scenario(source: str | Path | dict, calib: Optional[CalibrationSet] = None) -> Scene:
    """Build a Scene from a scenario document (path, shipped name, or dict)."""
    if isinstance(source, dict):
        doc = source
        name = doc.get("name", "inline")
    else:
        p = Path(source)
        if not p.exists():
            shipped = resources.files("phkit.data.scenarios").joinpath(str(source))
            if shipped.is_file():
                doc = json.loads(shipped.read_text())
            else:
                raise ScenarioError(str(source), "scenario file not found")
        else:
            doc = json.loads(p.read_text())
        name = doc.get("name", Path(str(source)).stem)

    if doc.get("version") != SCENARIO_FORMAT_VERSION:
        raise ScenarioError("version", f"unsupported scenario version: {doc.get('version')!r}")
    if calib is None:
        calib_ref = doc.get("calibration", "default")
        calib = materials.load_calibration(None if calib_ref == "default" else calib_ref)

    grid = _req(doc, "grid", "$")
    width = int(_req(grid, "width", "grid"))
    height = int(_req(grid, "height", "grid"))
    if width < 0 or height < 0:
        raise ScenarioError("grid", "width/height must be non-negative")

    warnings: list[str] = []
    cells: list[list[Cell]] = []
    if width and height:
        default_spec = _req(doc, "default_cell", "$")
        default_comp = _build_composite(
            _req(default_spec, "composite", "default_cell"), calib, "default_cell.composite"
        )
        warnings += [f"default_cell: {w}" for w in default_comp.warnings]
        base_kw = {
            "thickness_factor": float(default_spec.get("thickness_factor", 1.0)),
            "cloaked": bool(default_spec.get("cloaked", False)),
            "responsive": bool(default_spec.get("responsive", True)),
        }
        for y in range(height):
            cells.append([_fresh_cell(default_comp, calib, **base_kw) for _ in range(width)])
        for i, ov in enumerate(doc.get("cell_overrides", [])):
            path = f"cell_overrides[{i}]"
            x, y = int(_req(ov, "x", path)), int(_req(ov, "y", path))
            if not (0 <= x < width and 0 <= y < height):
                raise ScenarioError(path, f"cell ({x}, {y}) outside the {width}x{height} grid")
            comp = default_comp
            if "composite" in ov:
                comp = _build_composite(ov["composite"], calib, f"{path}.composite")
                warnings += [f"{path}: {w}" for w in comp.warnings]
            kw = dict(base_kw)
            for key in ("thickness_factor", "cloaked", "responsive"):
                if key in ov:
                    kw[key] = ov[key]
            if kw["thickness_factor"] <= 0:
                raise ScenarioError(path, "thickness_factor must be positive")
            cells[y][x] = _fresh_cell(comp, calib, **kw)

    hinges = []
    for i, h in enumerate(doc.get("hinges", [])):
        path = f"hinges[{i}]"
        hc = tuple((int(x), int(y)) for x, y in _req(h, "cells", path))
        for x, y in hc:
            if not (0 <= x < width and 0 <= y < height):
                raise ScenarioError(path, f"hinge cell ({x}, {y}) outside the grid")
        hinges.append(Hinge(hinge_id=_req(h, "id", path), cells=hc))

    channels = []
    for i, ch in enumerate(doc.get("channels", [])):
        path = f"channels[{i}]"
        fill = _parse_solution(_req(ch, "fill", path), f"{path}.fill")
        left = _parse_solution(ch["left"], f"{path}.left") if ch.get("left") else None
        right = _parse_solution(ch["right"], f"{path}.right") if ch.get("right") else None
        try:
            channel = fluidics.make_channel(
                length=float(_req(ch, "length", path)),
                diameter=float(_req(ch, "diameter", path)),
                n_cells=int(_req(ch, "n_cells", path)),
                fill=fill,
                left=left,
                right=right,
                diffusivity=ch.get("diffusivity", fluidics.DEFAULT_DIFFUSIVITY),
            )
        except Exception as exc:
            raise ScenarioError(path, str(exc)) from exc
        lining = tuple((int(x), int(y)) for x, y in ch.get("lining", []))
        for x, y in lining:
            if not (0 <= x < width and 0 <= y < height):
                raise ScenarioError(path, f"lining cell ({x}, {y}) outside the grid")
        channels.append(SceneChannel(channel_id=_req(ch, "id", path), channel=channel, lining=lining))
    channel_ids = {c.channel_id for c in channels}

    events = []
    prev_time = -math.inf
    for i, ev in enumerate(doc.get("events", [])):
        path = f"events[{i}]"
        t = float(_req(ev, "time", path))
        if t < 0:
            raise ScenarioError(path, "event time must be non-negative")
        if t < prev_time:
            raise ScenarioError(path, "events must be sorted by time")
        mode = _req(ev, "mode", path)
        solution = _parse_solution(_req(ev, "solution", path), f"{path}.solution")
        targets = None
        if mode == "global":
            pass
        elif mode == "local":
            targets = _req(ev, "channel", path)
            if targets not in channel_ids:
                raise ScenarioError(path, f"unknown channel: {targets!r}")
        elif mode == "discrete":
            targets = []
            for cell_spec in _req(ev, "targets", path):
                x, y = int(cell_spec[0]), int(cell_spec[1])
                vol = float(cell_spec[2]) if len(cell_spec) > 2 else 0.75
                if not (0 <= x < width and 0 <= y < height):
                    raise ScenarioError(path, f"target cell ({x}, {y}) outside the grid")
                if vol <= 0:
                    raise ScenarioError(path, "droplet volume must be positive")
                targets.append((x, y, vol))
            targets = tuple(targets)
        else:
            raise ScenarioError(path, f"unknown event mode: {mode!r}")
        if events and events[-1].time == t and _targets_overlap(events[-1], mode, targets):
            raise ScenarioError(path, "duplicate timestamp for an overlapping target")
        prev_time = t
        events.append(DepositionEvent(mode=mode, solution=solution, targets=targets, time=t))

    return Scene(
        name=name,
        width=width,
        height=height,
        cells=tuple(tuple(row) for row in cells),
        hinges=tuple(hinges),
        channels=tuple(channels),
        events=tuple(events),
        clock=0.0,
        calib=calib,
        warnings=tuple(warnings),
    )


def _targets_overlap(prev: DepositionEvent, mode: str, targets) -> bool:
    if prev.mode == "global" or mode == "global":
        return True
    if prev.mode == "local" and mode == "local":
        return prev.targets == targets
    if prev.mode == "discrete" and mode == "discrete":
        a = {(x, y) for x, y, _ in prev.targets}
        b = {(x, y) for x, y, _ in targets}
        return bool(a & b)
    return False


# --------------------------------------------------------------------------
# stepping


def _apply_to_cell(cell: Cell, ph: float, calib: CalibrationSet) -> Cell:
    if cell.cloaked or not cell.responsive:
        return cell
    states = tuple(
        materials.step_state(st, ph, 0.0, calib, cell.thickness_factor) for st in cell.states
    )
    return replace(cell, states=states)


def apply_event(scene: Scene, event: DepositionEvent) -> Scene:
    """Deposit an event's solution on its target cells (and channel)."""
    ph = float(equilibrium_ph(event.solution))
    rows = [list(r) for r in scene.cells]
    channels = scene.channels
    if event.mode == "global":
        for y in range(scene.height):
            for x in range(scene.width):
                rows[y][x] = _apply_to_cell(rows[y][x], ph, scene.calib)
    elif event.mode == "local":
        match = [c for c in channels if c.channel_id == event.targets]
        if not match:
            raise ScenarioError("event", f"unknown channel: {event.targets!r}")
        sc = match[0]
        channels = tuple(
            replace(c, channel=fluidics.with_left_boundary(c.channel, event.solution))
            if c.channel_id == sc.channel_id
            else c
            for c in channels
        )
        for x, y in sc.lining:
            rows[y][x] = _apply_to_cell(rows[y][x], ph, scene.calib)
    elif event.mode == "discrete":
        for x, y, _vol in event.targets:
            if not (0 <= x < scene.width and 0 <= y < scene.height):
                raise ScenarioError("event", f"target cell ({x}, {y}) outside the grid")
            rows[y][x] = _apply_to_cell(rows[y][x], ph, scene.calib)
    else:
        raise ScenarioError("event", f"unknown event mode: {event.mode!r}")
    return replace(scene, cells=tuple(tuple(r) for r in rows), channels=channels)


def _advance_cell(cell: Cell, dt: float, calib: CalibrationSet) -> Cell:
    if cell.cloaked:
        return cell
    states = []
    changed = False
    for st in cell.states:
        applied = getattr(st, "applied_ph", None)
        if applied is None:
            applied = getattr(st, "last_applied_ph", None)
        if applied is None:
            states.append(st)  # dry film: nothing to relax toward
            continue
        states.append(materials.step_state(st, applied, dt, calib, cell.thickness_factor))
        changed = True
    return replace(cell, states=tuple(states)) if changed else cell


def _advance_channel(sc: SceneChannel, dt: float) -> SceneChannel:
    n_sub = max(1, math.ceil(dt / (0.4 * sc.channel.max_stable_dt)))
    sub = dt / n_sub
    ch = sc.channel
    for _ in range(n_sub):
        ch = fluidics.diffuse_step(ch, sub)
    return replace(sc, channel=ch)


def step(scene: Scene, dt: float) -> Scene:
    """Advance the scene by dt: consume due events, relax cells, diffuse."""
    if dt <= 0:
        raise ScenarioError("step", "dt must be positive")
    deadline = scene.clock + dt
    pending = list(scene.events)
    while pending and pending[0].time <= deadline:
        scene = apply_event(scene, pending.pop(0))
    rows = tuple(
        tuple(_advance_cell(c, dt, scene.calib) for c in row) for row in scene.cells
    )
    channels = tuple(_advance_channel(sc, dt) for sc in scene.channels)
    return replace(
        scene, cells=rows, channels=channels, events=tuple(pending), clock=deadline
    )


# --------------------------------------------------------------------------
# rendering


def render_frame(scene: Scene) -> Frame:
    color_rows = []
    odor_rows = []
    total_odor = 0.0
    for row in scene.cells:
        crow = []
        orow = []
        for cell in row:
            lab = None
            odor = 0.0
            for (kind, _), st in zip(cell.composite.layers, cell.states):
                if kind == "color" and lab is None:
                    lab = st.current
                elif kind == "odor":
                    odor += st.intensity
            crow.append(lab)
            orow.append(odor)
            total_odor += odor
        color_rows.append(tuple(crow))
        odor_rows.append(tuple(orow))

    angles = []
    for hinge in scene.hinges:
        vals = []
        for x, y in hinge.cells:
            cell = scene.cell(x, y)
            for (kind, _), st in zip(cell.composite.layers, cell.states):
                if kind == "shape":
                    vals.append(st.angle)
        angles.append((hinge.hinge_id, sum(vals) / len(vals) if vals else 0.0))

    return Frame(
        time=scene.clock,
        color_grid=tuple(color_rows),
        angle_list=tuple(angles),
        odor_field=tuple(odor_rows),
        aggregate_odor=total_odor,
    )


def frame_to_dict(frame: Frame) -> dict:
    """JSON-ready form of a frame (the service wire format)."""
    return {
        "time": frame.time,
        "color_grid": [
            [None if lab is None else list(lab) for lab in row] for row in frame.color_grid
        ],
        "angles": [{"hinge_id": hid, "degrees": angle} for hid, angle in frame.angle_list],
        "odor_field": [list(row) for row in frame.odor_field],
        "aggregate_odor": frame.aggregate_odor,
    }


def frame_to_csv(frame: Frame) -> str:
    """Delimited-text form of a frame: one cell per row plus hinge rows."""
    lines = [f"# time,{frame.time!r}", "type,x,y,L,a,b,odor"]
    for y, (crow, orow) in enumerate(zip(frame.color_grid, frame.odor_field)):
        for x, (lab, odor) in enumerate(zip(crow, orow)):
            if lab is None:
                lines.append(f"cell,{x},{y},,,,{odor!r}")
            else:
                lines.append(
                    f"cell,{x},{y},{lab[0]!r},{lab[1]!r},{lab[2]!r},{odor!r}"
                )
    for hid, angle in frame.angle_list:
        lines.append(f"hinge,{hid},,,,,{angle!r}")
    lines.append(f"aggregate_odor,,,,,,{frame.aggregate_odor!r}")
    return "\n".join(lines) + "\n"


def frame_to_png(frame: Frame, path: str | Path) -> None:
    """One pixel per cell, Lab converted to sRGB (D65), gamut-clipped."""
    from PIL import Image

    from .colorspace import lab_to_srgb

    h = len(frame.color_grid)
    w = len(frame.color_grid[0]) if h else 0
    img = Image.new("RGB", (max(w, 1), max(h, 1)), (0, 0, 0))
    px = img.load()
    for y, row in enumerate(frame.color_grid):
        for x, lab in enumerate(row):
            if lab is not None:
                px[x, y] = lab_to_srgb(lab)[0]
    img.save(path)
