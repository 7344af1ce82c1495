"""Run configuration: sectioned key-value files and their validation.

Format: INI-style sections ``[geometry] [observables] [domain] [numerics]
[outputs]`` with ``key = value`` lines and ``#`` comment lines.  List-valued
keys (coords, frame, phi, box, resolution, samples) use JSON syntax, e.g.
``frame = [["1","0"],["0","1+x^2"]]`` where row i holds the coordinate
components of field i.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ParseError
from .frames import FrameSpec

_SECTIONS = ("geometry", "observables", "domain", "numerics", "outputs")

_NUMERIC_DEFAULTS = {
    "rank_tol": 1e-9,
    "ode_step": 1e-3,
    "probe_radius": 0.1,
    "feature_tol": 1e-6,
    "killing_tol": 1e-6,
    "transport_tol": 1e-7,
}


@dataclass
class RunConfig:
    dim: int
    coords: tuple[str, ...]
    frame: tuple[tuple[str, ...], ...]
    observables: tuple[str, ...]
    box: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    samples: tuple[tuple[float, ...], ...]
    rank_tol: float
    ode_step: float
    probe_radius: float
    probe_count: int
    feature_tol: float
    killing_tol: float
    transport_tol: float
    max_order: int
    directory: str
    figures: bool
    source: str = ""
    _spec: FrameSpec | None = field(default=None, repr=False)

    def frame_spec(self) -> FrameSpec:
        if self._spec is None:
            self._spec = FrameSpec.from_strings(
                self.coords, self.frame, self.observables, self.box,
                max_jet_order=self.max_order,
            )
        return self._spec


def _default_samples(box, dim: int) -> tuple[tuple[float, ...], ...]:
    """Deterministic 3^n interior lattice at quarter fractions of the box."""
    import itertools

    axes = []
    for lo, hi in box:
        axes.append([lo + f * (hi - lo) for f in (0.25, 0.5, 0.75)])
    return tuple(tuple(p) for p in itertools.product(*axes))


def _parse_sections(text: str, path: str):
    """Raw (section -> key -> (value text, line number)) mapping."""
    data: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in _SECTIONS:
                raise ConfigError(current, "", f"unknown section in {path}", lineno)
            data.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(current or "?", "", f"expected 'key = value': {line!r}", lineno)
        if current is None:
            raise ConfigError("?", "", f"key outside a section: {line!r}", lineno)
        key, _, value = line.partition("=")
        data[current][key.strip()] = (value.strip(), lineno)
    return data


def _get_json(data, section, key, expected, default=None):
    if section not in data or key not in data[section]:
        if default is not None:
            return default
        raise ConfigError(section, key, "required key missing")
    text, line = data[section][key]
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(section, key, f"invalid JSON value: {exc}", line) from None
    if not isinstance(value, expected):
        raise ConfigError(section, key, f"expected {expected.__name__}", line)
    return value


def _get_scalar(data, section, key, cast, default):
    if section not in data or key not in data[section]:
        return default
    text, line = data[section][key]
    try:
        return cast(text)
    except ValueError as exc:
        raise ConfigError(section, key, str(exc), line) from None


def _get_bool(data, section, key, default):
    if section not in data or key not in data[section]:
        return default
    text, line = data[section][key]
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(section, key, f"expected true/false, got {text!r}", line)


def load_config(path) -> RunConfig:
    """Parse and validate a run configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("geometry", "", f"config file not found: {path}")
    data = _parse_sections(path.read_text(), str(path))

    dim = _get_scalar(data, "geometry", "dim", int, None)
    coords = _get_json(data, "geometry", "coords", list)
    if dim is None:
        dim = len(coords)
    if len(coords) != dim or len(set(coords)) != dim:
        raise ConfigError("geometry", "coords",
                          f"need {dim} distinct names, got {coords}",
                          data["geometry"]["coords"][1])
    frame = _get_json(data, "geometry", "frame", list)
    line = data["geometry"]["frame"][1]
    if len(frame) != dim or any(not isinstance(r, list) or len(r) != dim for r in frame):
        raise ConfigError("geometry", "frame",
                          f"expected {dim} rows of {dim} entries", line)
    frame = tuple(tuple(str(e) for e in row) for row in frame)

    observables: tuple[str, ...] = ()
    if "observables" in data and "phi" in data["observables"]:
        observables = tuple(str(e) for e in _get_json(data, "observables", "phi", list))

    box_raw = _get_json(data, "domain", "box", list)
    line = data["domain"]["box"][1]
    if len(box_raw) != dim or any(not isinstance(iv, list) or len(iv) != 2 for iv in box_raw):
        raise ConfigError("domain", "box", f"expected {dim} [lo, hi] intervals", line)
    box = tuple((float(lo), float(hi)) for lo, hi in box_raw)
    if any(lo >= hi for lo, hi in box):
        raise ConfigError("domain", "box", "each interval needs lo < hi", line)

    resolution = tuple(
        int(r) for r in _get_json(data, "domain", "resolution", list, [21] * dim)
    )
    if len(resolution) != dim or any(r < 3 for r in resolution):
        raise ConfigError("domain", "resolution",
                          f"expected {dim} counts, each >= 3, got {list(resolution)}")
    samples_raw = _get_json(data, "domain", "samples", list, None) \
        if "domain" in data and "samples" in data["domain"] else None
    if samples_raw is None:
        samples = _default_samples(box, dim)
    else:
        samples = tuple(tuple(float(c) for c in p) for p in samples_raw)
        if any(len(p) != dim for p in samples):
            raise ConfigError("domain", "samples", f"each sample needs {dim} coordinates")

    numerics = {}
    for key, default in _NUMERIC_DEFAULTS.items():
        numerics[key] = _get_scalar(data, "numerics", key, float, default)
        if numerics[key] <= 0:
            raise ConfigError("numerics", key,
                              f"must be positive, got {numerics[key]!r}",
                              data.get("numerics", {}).get(key, (None, None))[1])
    probe_count = _get_scalar(data, "numerics", "probe_count", int, 2 * dim + 2)
    if probe_count < 1:
        raise ConfigError("numerics", "probe_count", "must be at least 1")
    max_order = _get_scalar(data, "numerics", "max_order", int, dim + 3)
    if not dim + 1 <= max_order <= dim + 3:
        raise ConfigError("numerics", "max_order",
                          f"must lie in [{dim + 1}, {dim + 3}], got {max_order}")

    directory = "out"
    if "outputs" in data and "directory" in data["outputs"]:
        directory = data["outputs"]["directory"][0]
    figures = _get_bool(data, "outputs", "figures", True)

    cfg = RunConfig(
        dim=dim, coords=tuple(coords), frame=frame, observables=observables,
        box=box, resolution=resolution, samples=samples,
        probe_count=probe_count, max_order=max_order,
        directory=directory, figures=figures, source=str(path), **numerics,
    )
    try:
        cfg.frame_spec()
    except ParseError as exc:
        raise ConfigError("geometry", "frame", f"expression error: {exc}") from exc
    return cfg
