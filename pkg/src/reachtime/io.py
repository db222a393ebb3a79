"""File formats: system/polytope JSON in, CSV/OFF/JSON out.

Writers use fixed ordering, ``.17g`` floats and LF line endings so the same
inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from reachtime.convex_geometry import Polytope
from reachtime.dynamics import LinearSystem, Tabulated


class ConfigError(ValueError):
    """Unusable configuration or input file."""


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8", newline="\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


# --------------------------------------------------------------------------
# inputs

def _matrix(value, name: str):
    if isinstance(value, dict):
        if "times" not in value or "values" not in value:
            raise ConfigError(f"{name}: tabulated matrix needs 'times' and 'values'")
        try:
            return Tabulated(value["times"], value["values"])
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None
    try:
        M = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: not a numeric matrix") from None
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ConfigError(f"{name}: expected a matrix, got {M.ndim} dimensions")
    return M


def polytope_from_json(data, name: str = "polytope") -> Polytope:
    if not isinstance(data, dict) or "vertices" not in data:
        raise ConfigError(f"{name}: expected {{\"dim\": d, \"vertices\": [...]}}")
    try:
        return Polytope.from_json(data)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def system_from_json(data: dict, name: str = "") -> LinearSystem:
    missing = [k for k in ("A", "B", "U", "S") if k not in data]
    if missing:
        raise ConfigError(f"system description lacks {', '.join(missing)}")
    try:
        return LinearSystem(
            _matrix(data["A"], "A"), _matrix(data["B"], "B"),
            polytope_from_json(data["U"], "U"), polytope_from_json(data["S"], "S"),
            float(data.get("t0", 0.0)), float(data.get("tf", 1.0)), name=data.get("name", name))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid system: {exc}") from None


def system_to_json(system: LinearSystem) -> dict:
    def mat(M):
        if isinstance(M, Tabulated):
            return M.to_json()
        if callable(M):
            raise ValueError("callable coefficients cannot be serialized")
        return np.asarray(M).tolist()

    return {"name": system.name, "A": mat(system.A), "B": mat(system.B),
            "U": system.U.to_json(), "S": system.S.to_json(),
            "t0": system.t0, "tf": system.tf}


# --------------------------------------------------------------------------
# outputs

def write_front_csv(path, front, directions: np.ndarray) -> None:
    n = front.points.shape[1]
    if n == 2:
        header = ["level", "t", "dir_index", "lx", "ly", "px", "py"]
    else:
        header = ["level", "t", "dir_index"] + [f"l{j + 1}" for j in range(n)] + [f"p{j + 1}" for j in range(n)]
    rows = ([front.level, front.time, int(k), *directions[k], *front.points[k]]
            for k in front.direction_index)
    write_csv(path, header, rows)


def write_off(path, surface) -> None:
    """``nV nT`` header, ``x y T`` vertex lines, ``a b c`` triangle lines."""
    lines = [f"{len(surface.vertices)} {len(surface.triangles)}"]
    lines += [f"{fmt(x)} {fmt(y)} {fmt(t)}" for (x, y), t in zip(surface.vertices, surface.values)]
    lines += [f"{a} {b} {c}" for a, b, c in surface.triangles]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_off(path):
    tokens = Path(path).read_text(encoding="utf-8").split("\n")
    nv, nt = (int(s) for s in tokens[0].split())
    V = np.array([[float(s) for s in line.split()] for line in tokens[1:1 + nv]])
    T = np.array([[int(s) for s in line.split()] for line in tokens[1 + nv:1 + nv + nt]], dtype=int)
    return V[:, :2], V[:, 2], T


def write_surface_csv(path, surface) -> None:
    write_csv(path, ["x", "y", "T"],
              ([x, y, t] for (x, y), t in zip(surface.vertices, surface.values)))


def write_trajectory_csv(path, path_obj) -> None:
    n = path_obj.trajectory.shape[1]
    m = path_obj.controls.shape[-1]
    header = ["t"] + [f"x{j + 1}" for j in range(n)] + [f"u{j + 1}" for j in range(m)] + [f"eta{j + 1}" for j in range(n)]
    u = path_obj.control_signal().node_values()
    rows = ([t, *x, *uu, *e] for t, x, uu, e in
            zip(path_obj.times, path_obj.trajectory, u, path_obj.etas))
    write_csv(path, header, rows)
