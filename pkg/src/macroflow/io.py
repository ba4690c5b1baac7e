"""Versioned, human-readable file formats: instances, placements, traces, datasets.

Everything is JSON with an explicit format/version header. Serialization is
canonical (fixed key order, two-space indent, trailing newline), so
parse -> serialize is a projection and seeded pipelines produce
bitwise-identical artifacts.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import Canvas, Macro, Netlist, PlacementInstance

INSTANCE_FORMAT = "macroflow-instance"
PLACEMENT_FORMAT = "macroflow-placement"
TRACE_FORMAT = "macroflow-trace"
DATASET_FORMAT = "macroflow-dataset"
FORMAT_VERSION = 1


class InstanceFormatError(ValueError):
    """A document failed to parse or violated an instance invariant."""


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _check_header(doc: dict, expected_format: str, source: str) -> None:
    if not isinstance(doc, dict):
        raise InstanceFormatError(f"{source}: top-level value must be an object")
    if doc.get("format") != expected_format:
        raise InstanceFormatError(
            f"{source}: field 'format' is {doc.get('format')!r}, expected {expected_format!r}"
        )
    if doc.get("version") != FORMAT_VERSION:
        raise InstanceFormatError(
            f"{source}: unsupported version {doc.get('version')!r} (this build reads version {FORMAT_VERSION})"
        )


def _load_json(text: str, source: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise InstanceFormatError(f"{source}:{err.lineno}:{err.colno}: {err.msg}") from err


# -- instances ---------------------------------------------------------------------


def serialize_instance(instance: PlacementInstance, positions: np.ndarray | None = None) -> str:
    doc = {
        "format": INSTANCE_FORMAT,
        "version": FORMAT_VERSION,
        "canvas": {"width": instance.canvas.width, "height": instance.canvas.height},
        "macros": [
            {
                "id": m.id,
                "width": m.width,
                "height": m.height,
                "pins": [[float(dx), float(dy)] for dx, dy in m.pins],
            }
            for m in instance.macros
        ],
        "edges": [[int(v) for v in row] for row in instance.netlist.edges],
    }
    if positions is not None:
        doc["placement"] = [[float(x), float(y)] for x, y in np.asarray(positions)]
    return _dump(doc)


def parse_instance(text: str, source: str = "<string>") -> tuple[PlacementInstance, np.ndarray | None]:
    """Parse and validate an instance document; enforces every invariant."""
    doc = _load_json(text, source)
    _check_header(doc, INSTANCE_FORMAT, source)
    try:
        canvas = Canvas(float(doc["canvas"]["width"]), float(doc["canvas"]["height"]))
    except (KeyError, TypeError) as err:
        raise InstanceFormatError(f"{source}: field 'canvas' missing or malformed ({err})") from err
    except ValueError as err:
        raise InstanceFormatError(f"{source}: canvas: {err}") from err

    macros = []
    for idx, entry in enumerate(doc.get("macros", [])):
        try:
            if int(entry["id"]) != idx:
                raise InstanceFormatError(
                    f"{source}: macros[{idx}] has id {entry['id']}, ids must equal list position"
                )
            macros.append(
                Macro(
                    id=idx,
                    width=float(entry["width"]),
                    height=float(entry["height"]),
                    pins=np.array(entry.get("pins", []), dtype=float).reshape(-1, 2),
                )
            )
        except InstanceFormatError:
            raise
        except (KeyError, TypeError, ValueError) as err:
            raise InstanceFormatError(f"{source}: macros[{idx}]: {err}") from err

    edges = doc.get("edges", [])
    for k, row in enumerate(edges):
        if not (isinstance(row, list) and len(row) == 4):
            raise InstanceFormatError(f"{source}: edges[{k}] must be [macro_a, pin_a, macro_b, pin_b]")
    try:
        instance = PlacementInstance(canvas, tuple(macros), Netlist(np.array(edges, dtype=np.int64).reshape(-1, 4)))
    except ValueError as err:
        raise InstanceFormatError(f"{source}: {err}") from err

    positions = None
    if "placement" in doc:
        positions = np.asarray(doc["placement"], dtype=float)
        if positions.shape != (instance.num_macros, 2):
            raise InstanceFormatError(
                f"{source}: placement has shape {positions.shape}, expected ({instance.num_macros}, 2)"
            )
    return instance, positions


def write_instance(path, instance: PlacementInstance, positions: np.ndarray | None = None) -> None:
    Path(path).write_text(serialize_instance(instance, positions))


def read_instance(path) -> tuple[PlacementInstance, np.ndarray | None]:
    return parse_instance(Path(path).read_text(), source=str(path))


# -- placements and traces -----------------------------------------------------------


def serialize_placement(positions: np.ndarray, meta: dict | None = None) -> str:
    doc = {
        "format": PLACEMENT_FORMAT,
        "version": FORMAT_VERSION,
        "positions": [[float(x), float(y)] for x, y in np.asarray(positions)],
        "meta": meta or {},
    }
    return _dump(doc)


def parse_placement(text: str, source: str = "<string>") -> np.ndarray:
    doc = _load_json(text, source)
    _check_header(doc, PLACEMENT_FORMAT, source)
    return np.asarray(doc["positions"], dtype=float).reshape(-1, 2)


def write_placement(path, positions: np.ndarray, meta: dict | None = None) -> None:
    Path(path).write_text(serialize_placement(positions, meta))


def read_placement(path) -> np.ndarray:
    return parse_placement(Path(path).read_text(), source=str(path))


def serialize_trace(frames, meta: dict | None = None) -> str:
    doc = {
        "format": TRACE_FORMAT,
        "version": FORMAT_VERSION,
        "frames": [[[float(x), float(y)] for x, y in np.asarray(f)] for f in frames],
        "meta": meta or {},
    }
    return _dump(doc)


def read_trace(path) -> list[np.ndarray]:
    doc = _load_json(Path(path).read_text(), source=str(path))
    _check_header(doc, TRACE_FORMAT, str(path))
    return [np.asarray(f, dtype=float).reshape(-1, 2) for f in doc["frames"]]


# -- datasets --------------------------------------------------------------------------


def instance_filename(index: int) -> str:
    return f"instance-{index:05d}.json"


def write_dataset(directory, records, stats: dict | None = None) -> None:
    """One instance file per record plus a manifest with generation stats."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, (instance, positions) in enumerate(records):
        write_instance(directory / instance_filename(i), instance, positions)
    manifest = {
        "format": DATASET_FORMAT,
        "version": FORMAT_VERSION,
        "count": len(records),
        "stats": stats or {},
    }
    (directory / "manifest.json").write_text(_dump(manifest))


def read_dataset(directory, require_placement: bool = True):
    """Load every instance file of a dataset directory, in index order."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if manifest_path.exists():
        manifest = _load_json(manifest_path.read_text(), str(manifest_path))
        _check_header(manifest, DATASET_FORMAT, str(manifest_path))
        paths = [directory / instance_filename(i) for i in range(manifest["count"])]
    else:
        paths = sorted(directory.glob("instance-*.json"))
    if not paths:
        raise InstanceFormatError(f"{directory}: no instance files found")
    records = []
    for p in paths:
        instance, positions = read_instance(p)
        if require_placement and positions is None:
            raise InstanceFormatError(f"{p}: dataset record has no reference placement")
        records.append((instance, positions))
    return records


def read_config_file(path) -> dict:
    """Config files are flat JSON objects whose keys mirror CLI flag names."""
    doc = _load_json(Path(path).read_text(), source=str(path))
    if not isinstance(doc, dict):
        raise InstanceFormatError(f"{path}: config file must hold a JSON object")
    return doc
