"""Config parsing, CSV/JSON writers and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError
from .lattice import ModelParams

SCHEMA_VERSIONS = {
    "spectrum": 1,
    "phase_diagram": 1,
    "fidelity_grid": 1,
    "entropy_curve": 1,
    "boundaries": 1,
    "braid": 1,
}

# defaults follow the figure captions: t1 = t3 = t4 = 1, mu = 0.5, q = 1
DEFAULTS = {
    "t1": 1.0,
    "t2": 2.0,
    "t3": 1.0,
    "t4": 1.0,
    "lambda": 0.7,
    "mu": 0.5,
    "q": 1,
    "n_k": 1024,
    "theta": 0.0,
    "sites": 1600,
    "cuts": None,
    "sizes": "200,400,800,1600",
    "eps": 0.01,
    "clip": 2e4,
    "lambda_min": 0.0,
    "lambda_max": 1.5,
    "t2_min": 0.0,
    "t2_max": 3.0,
    "lambda_resolution": 64,
    "t2_resolution": 64,
    "with_knots": False,
    "svg": True,
    "k_samples": 64,
    "workers": "auto",
    "out": "out",
}

_INT_KEYS = {"q", "n_k", "sites", "lambda_resolution", "t2_resolution", "k_samples"}
_FLOAT_KEYS = {"t1", "t2", "t3", "t4", "lambda", "mu", "theta", "eps", "clip",
               "lambda_min", "lambda_max", "t2_min", "t2_max"}
_BOOL_KEYS = {"with_knots", "svg"}
_STR_KEYS = {"cuts", "sizes", "workers", "out"}

# per-command defaults that differ from the global table
COMMAND_DEFAULTS = {
    "fidelity": {"sites": 600},
    "fidelity-scan": {"sites": 600, "lambda_resolution": 48, "t2_resolution": 48},
    "spectrum": {"n_k": 512},
    "braid": {"n_k": 512},
}


def _coerce(key: str, value: str, line: int | None, source: str | None):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _BOOL_KEYS:
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        return value.strip()
    except ValueError:
        raise ConfigError(f"cannot parse value {value!r} for key {key!r}", line, source) from None


def parse_config_text(text: str, source: str | None = None) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", lineno, source)
        out[key] = _coerce(key, value, lineno, source)
    return out


def parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"override must be KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        out[key] = _coerce(key, value, None, "--set")
    return out


@dataclass
class RunConfig:
    values: dict

    @classmethod
    def resolve(cls, command: str, path: str | None = None, overrides=None) -> "RunConfig":
        values = dict(DEFAULTS)
        values.update(COMMAND_DEFAULTS.get(command, {}))
        if path is not None:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}", source=str(path)) from exc
            values.update(parse_config_text(text, str(path)))
        values.update(parse_overrides(overrides))
        cfg = cls(values)
        cfg.model()  # validate early
        return cfg

    def __getitem__(self, key):
        return self.values[key]

    def model(self) -> ModelParams:
        try:
            return ModelParams.from_dict({k: self.values[k] for k in ("t1", "t2", "t3", "t4", "lambda", "mu", "q")})
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def int_list(self, key: str) -> list[int]:
        return parse_int_list(self.values[key], key)

    def to_dict(self) -> dict:
        return dict(self.values)


def parse_int_list(spec, key: str = "value") -> list[int]:
    """``"100,200,300"`` or ``"start:stop:step"`` (stop inclusive)."""
    if spec is None:
        raise ConfigError(f"{key} is required")
    spec = str(spec).strip()
    try:
        if ":" in spec:
            start, stop, step = (int(s) for s in spec.split(":"))
            if step <= 0:
                raise ValueError
            return list(range(start, stop + 1, step))
        return [int(s) for s in spec.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse integer list {spec!r} for {key}") from None


def fmt(x) -> str:
    """Decimal with 12 significant digits."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return "nan"
    return f"{x:.12g}"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def spectrum_csv(strings) -> str:
    header = ["k"] + [f"E{i + 1}_{part}" for i in range(strings.n_bands) for part in ("re", "im")]
    rows = []
    for k, e in zip(strings.k_grid, strings.bands):
        row = [k]
        for z in e:
            row += [z.real, z.imag]
        rows.append(row)
    return csv_text(header, rows)


def grid_csv(grid) -> str:
    """One row per cell; winding grids carry ``w`` and ``knot_tag``, fidelity grids ``log1p_abs_chi``."""
    if grid.value_name == "w":
        header = ["lambda", "t2", "w", "flag", "knot_tag"]
    else:
        header = ["lambda", "t2", grid.value_name, "flag"]
    rows = []
    for i, t2 in enumerate(grid.t2_axis):
        for j, lam in enumerate(grid.lambda_axis):
            flag = bool(grid.flags[i, j])
            if grid.value_name == "w":
                w = "" if flag else str(int(grid.values[i, j]))
                tag = grid.knot_tags[i][j] if grid.knot_tags is not None else None
                rows.append([lam, t2, w, flag, tag or ""])
            else:
                rows.append([lam, t2, grid.values[i, j], flag])
    return csv_text(header, rows)


def entropy_csv(curve) -> str:
    name = "L_A" if curve.mode == "vary_cut" else "L"
    imag = curve.imag if curve.imag is not None else np.zeros_like(curve.entropy)
    return csv_text([name, "S", "S_imag"], zip(curve.abscissa, curve.entropy, imag))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class OutputManifest:
    command: str
    config: dict
    out_dir: Path
    files: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    _t0: float = field(default_factory=time.perf_counter)

    def write_text(self, name: str, text: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        data = text.encode()
        path.write_bytes(data)
        self.files[name] = sha256_bytes(data)
        return path

    def write_json(self, name: str, payload) -> Path:
        return self.write_text(name, json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")

    def finish(self) -> Path:
        self.timings["total_s"] = round(time.perf_counter() - self._t0, 6)
        payload = {
            "command": self.command,
            "tool": "nhknots",
            "version": __version__,
            "schemas": SCHEMA_VERSIONS,
            "config": self.config,
            "files": self.files,
            "timings": self.timings,
            "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            **self.extra,
        }
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"manifest_{self.command}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
        return path


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def default_out_dir(cfg: RunConfig) -> Path:
    return Path(os.path.expanduser(str(cfg["out"])))
