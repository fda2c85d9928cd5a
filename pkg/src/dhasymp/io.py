"""On-disk formats: run configs, snapshots, CSV/JSON tables.

Snapshot files hold the density as raw little-endian float64 with the x
index varying fastest, next to a JSON manifest. Configs are ``key = value``
lines grouped under ``[section]`` headers.
"""

from __future__ import annotations

import configparser
import csv
import io as _io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .solver import FieldState, GridSpec, SolverConfig

__all__ = [
    "fnv1a64",
    "RunConfig",
    "load_config",
    "write_snapshot",
    "read_snapshot",
    "write_csv",
    "read_csv",
    "write_json",
    "fmt_float",
]

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


def fmt_float(v) -> str:
    """17 significant digits, enough to round-trip any float64."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v + 0.0:.17g}"


_DEFAULTS = {
    "grid": {"n": "64", "box_length": "32.0"},
    "initial": {"preset": "offset_gaussian", "mass": "0.1", "width": "1.0", "offset": "1.0, 0.0, 0.0"},
    "solver": {
        "dt": "0.025",
        "t_end": "0.75",
        "interaction_sign": "1",
        "poisson_mode": "free_space_padded",
        "dealias": "true",
        "snapshot_times": "0.25, 0.5",
    },
    "run": {"seed": "0"},
}


@dataclass
class RunConfig:
    """Parsed ``key = value`` config with sections ``grid``, ``initial``, ``solver``, ``run``."""

    sections: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str.lower
        cp.read_string(text)
        sections = {name: dict(cp[name]) for name in cp.sections()}
        return cls(sections)

    @classmethod
    def default(cls) -> "RunConfig":
        return cls({k: dict(v) for k, v in _DEFAULTS.items()})

    def get(self, section, key, fallback=None):
        sec = self.sections.get(section, {})
        if key in sec:
            return sec[key]
        return _DEFAULTS.get(section, {}).get(key, fallback)

    def to_text(self) -> str:
        """Canonical text: sections and keys sorted, single spaces around ``=``."""
        out = []
        for name in sorted(self.sections):
            out.append(f"[{name}]")
            for key in sorted(self.sections[name]):
                val = " ".join(str(self.sections[name][key]).split())
                out.append(f"{key} = {val}")
        return "\n".join(out) + "\n"

    @property
    def hash(self) -> str:
        return fnv1a64(self.to_text())

    @property
    def seed(self) -> int:
        return int(self.get("run", "seed", "0"))

    def grid(self) -> GridSpec:
        return GridSpec(int(self.get("grid", "n")), float(self.get("grid", "box_length")))

    def solver_config(self) -> SolverConfig:
        snaps = self.get("solver", "snapshot_times", "") or ""
        times = tuple(float(v) for v in snaps.replace(",", " ").split())
        return SolverConfig(
            grid=self.grid(),
            dt=float(self.get("solver", "dt")),
            t_end=float(self.get("solver", "t_end")),
            interaction_sign=int(self.get("solver", "interaction_sign")),
            poisson_mode=self.get("solver", "poisson_mode"),
            dealias=_parse_bool(self.get("solver", "dealias")),
            snapshot_times=times,
        )

    def initial_params(self) -> dict:
        offset = tuple(float(v) for v in self.get("initial", "offset").replace(",", " ").split())
        return {
            "preset": self.get("initial", "preset"),
            "mass": float(self.get("initial", "mass")),
            "width": float(self.get("initial", "width")),
            "offset": offset,
        }


def _parse_bool(text) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_config(path) -> RunConfig:
    return RunConfig.from_text(Path(path).read_text())


def write_snapshot(directory, index: int, state: FieldState, extra: dict | None = None) -> Path:
    """Write ``snap_XXXX.bin`` plus ``snap_XXXX.json``; returns the .bin path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    stem = f"snap_{index:04d}"
    data = np.asarray(state.density, dtype="<f8")
    (d / f"{stem}.bin").write_bytes(data.tobytes(order="F"))
    meta = {
        "file": f"{stem}.bin",
        "n": state.grid.n,
        "box_length": state.grid.box_length,
        "time": state.time,
        "clock_offset": state.clock_offset,
        "mass": state.mass,
        "config_hash": state.provenance,
        "version": __version__,
        "dtype": "<f8",
        "order": "x-fastest",
    }
    if extra:
        meta.update(extra)
    write_json(d / f"{stem}.json", meta)
    return d / f"{stem}.bin"


def read_snapshot(json_path) -> FieldState:
    p = Path(json_path)
    meta = json.loads(p.read_text())
    n = int(meta["n"])
    raw = np.frombuffer((p.parent / meta["file"]).read_bytes(), dtype="<f8")
    if raw.size != n ** 3:
        raise ValueError(f"{meta['file']}: expected {n**3} values, found {raw.size}")
    u = raw.reshape((n, n, n), order="F").astype(float)
    grid = GridSpec(n, float(meta["box_length"]))
    return FieldState(float(meta["time"]), u, grid, meta.get("config_hash", ""), float(meta.get("clock_offset", 0.0)))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _clean(o):
    if isinstance(o, float) and not math.isfinite(o):
        return fmt_float(o)
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def write_json(path, obj) -> None:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default)
    Path(path).write_text(text + "\n")


def write_csv(path, header, rows, config_hash: str = "") -> None:
    """CSV with a leading ``#`` provenance comment, then a header row."""
    buf = _io.StringIO()
    buf.write(f"# dhasymp {__version__} config_hash={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool)
                    else v for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path):
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]
