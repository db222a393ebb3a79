"""Command-line front end.

    reachtime reach|mintime|trajectory|study --config run.json [--out DIR]
              [--dirs N] [--levels K] [--substeps N] [--scheme euler|heun|combination]

Exit codes: 0 success, 2 usage or configuration, 3 budget exceeded,
4 numerical or structural failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from importlib import metadata
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from reachtime import adjoint, catalog, mintime, reach
from reachtime.convex_geometry import hausdorff_distance
from reachtime.dynamics import LinearSystem, Scheme, default_direction_count
from reachtime.errors import GeometryError, PropagationError, StructuralError, UnsupportedError
from reachtime.io import (
    ConfigError, read_json, system_from_json, write_csv, write_front_csv,
    write_json, write_off, write_surface_csv, write_trajectory_csv,
)

log = logging.getLogger("reachtime")

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_NUMERIC = 0, 2, 3, 4
DEFAULT_BUDGET = 1e8
SCHEME_CHOICES = ("euler", "heun", "combination")


class BudgetError(RuntimeError):
    pass


@dataclass
class RunConfig:
    system: LinearSystem
    system_label: str
    example: Optional[catalog.Example]
    scheme: Scheme
    K: int
    N: int
    n_directions: int
    n_control_directions: Optional[int]
    mode: str
    out: Path
    oracle_name: str = "none"
    oracle: Optional[Callable] = None
    hoelder_k: int = 1
    samples: int = 500
    seed: int = 0
    budget: float = DEFAULT_BUDGET
    modulus: Optional[dict] = None
    C: Optional[float] = None
    eps: Optional[float] = None
    level: Optional[int] = None
    direction_index: int = 0
    study: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return (self.system.tf - self.system.t0) / (self.K * self.N)


def _int(data, key, default):
    v = data.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"'{key}' must be an integer, got {v!r}")
    return int(v)


def load_config(path, args: argparse.Namespace) -> RunConfig:
    path = Path(path)
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    sysspec = data.get("system")
    example = None
    if isinstance(sysspec, str) and sysspec.startswith("builtin:"):
        try:
            example = catalog.get(sysspec)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        system, label = example.system, sysspec
    elif isinstance(sysspec, str):
        spath = (path.parent / sysspec) if not Path(sysspec).is_absolute() else Path(sysspec)
        system, label = system_from_json(read_json(spath), spath.stem), str(spath)
    elif isinstance(sysspec, dict):
        system, label = system_from_json(sysspec, "inline"), "inline"
    else:
        raise ConfigError("'system' must be 'builtin:<name>', a path to a system JSON file, or an object")
    if "t0" in data or "tf" in data:
        try:
            system = replace(system, t0=float(data.get("t0", system.t0)), tf=float(data.get("tf", system.tf)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid horizon: {exc}") from None

    try:
        scheme = Scheme.get(args.scheme or data.get("scheme", "heun"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    K = args.levels if args.levels is not None else _int(data, "K", 10)
    N = args.substeps if args.substeps is not None else _int(data, "N", 10)
    if K < 1 or N < 1:
        raise ConfigError(f"need K >= 1 and N >= 1, got K={K}, N={N}")
    h = (system.tf - system.t0) / (K * N)
    dirs = args.dirs if args.dirs is not None else _int(data, "directions", None)
    if dirs is None:
        dirs = default_direction_count(h, scheme.order)
    if system.dim == 2 and dirs < 3:
        raise ConfigError("need at least 3 directions")
    mode = getattr(args, "mode", None) or data.get("mode", "recursive")
    if mode not in reach.MODES:
        raise ConfigError(f"mode must be one of {reach.MODES}")
    oracle_name = data.get("oracle", "none")
    if oracle_name not in catalog.ORACLES:
        raise ConfigError(f"unknown oracle {oracle_name!r}; choose from {sorted(catalog.ORACLES)}")
    out = Path(args.out) if args.out else Path(data.get("out", "out"))
    study = data.get("study", {}) or {}
    if not isinstance(study, dict):
        raise ConfigError("'study' must be an object")
    return RunConfig(
        system=system, system_label=label, example=example, scheme=scheme, K=K, N=N,
        n_directions=int(dirs), n_control_directions=_int(data, "control_directions", None),
        mode=mode, out=out, oracle_name=oracle_name, oracle=catalog.ORACLES[oracle_name],
        hoelder_k=_int(data, "hoelder_k", example.hoelder_k if example else 1),
        samples=_int(data, "samples", 500), seed=_int(data, "seed", 0),
        budget=float(data.get("budget", DEFAULT_BUDGET)), modulus=data.get("modulus"),
        C=data.get("C"), eps=data.get("eps"),
        level=getattr(args, "level", None) if getattr(args, "level", None) is not None else _int(data, "level", None),
        direction_index=(getattr(args, "direction", None) if getattr(args, "direction", None) is not None
                         else _int(data, "direction_index", 0)),
        study=study,
    )


def check_budget(K: int, N: int, dirs: int, cap: float) -> None:
    cost = K * N * dirs
    if cost > cap:
        raise BudgetError(f"K*N*directions = {K}*{N}*{dirs} = {cost:.3g} exceeds the budget {cap:.3g}")


def _run(cfg: RunConfig, K=None, N=None, mode=None) -> reach.ReachRun:
    K, N = K or cfg.K, N or cfg.N
    check_budget(K, N, cfg.n_directions, cfg.budget)
    return reach.run(cfg.system, cfg.scheme, K, N, cfg.n_directions, cfg.n_control_directions,
                     mode=mode or cfg.mode)


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0"


def _manifest(cfg: RunConfig, command: str, run: reach.ReachRun, files: list[str], extra=None) -> None:
    data = {
        "command": command,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "version": _version(),
        "system": cfg.system_label,
        "scheme": run.scheme.name,
        "order": run.scheme.order,
        "mode": run.mode,
        "K": run.grid.K,
        "N": run.grid.N,
        "h": run.grid.h,
        "dt": run.grid.dt,
        "n_directions": len(run.directions),
        "density_eps": run.directions.density_eps,
        "n_control_vertices": run.U_delta.n_vertices,
        "diagnostics": run.diagnostics(),
        "files": sorted(files),
    }
    if extra:
        data.update(extra)
    write_json(cfg.out / "manifest.json", data)


# --------------------------------------------------------------------------
# commands

def cmd_reach(cfg: RunConfig) -> int:
    run = _run(cfg)
    (cfg.out / "fronts").mkdir(parents=True, exist_ok=True)
    files = []
    for f in run.fronts:
        name = f"fronts/front_{f.level:03d}.csv"
        write_front_csv(cfg.out / name, f, run.directions.directions)
        files.append(name)
    _manifest(cfg, "reach", run, files)
    print(f"wrote {len(files)} front files to {cfg.out}")
    return EXIT_OK


def _set_error(cfg: RunConfig, run: reach.ReachRun) -> tuple[float, str]:
    if cfg.C is not None:
        return float(cfg.C) * run.grid.h ** run.scheme.order, "configured"
    if cfg.example is not None and cfg.example.exact_support is not None:
        return reach.set_error_vs_exact(run, cfg.example.exact_support), "exact support"
    return reach.richardson_set_error(cfg.system, cfg.scheme, cfg.K, cfg.N, cfg.n_directions,
                                      cfg.mode), "richardson"


def error_report(cfg: RunConfig, run: reach.ReachRun, surface: mintime.TimeSurface) -> dict:
    p, h = run.scheme.order, run.grid.h
    samples = mintime.domain_samples(surface, cfg.samples, cfg.seed)
    c_hp, c_source = _set_error(cfg, run)
    if cfg.modulus:
        kind = cfg.modulus.get("kind", "lipschitz")
        const = float(cfg.modulus["constant"])
        k = int(cfg.modulus.get("k", cfg.hoelder_k))
        mod_source = "configured"
    else:
        kind = "hoelder" if cfg.hoelder_k > 1 else "lipschitz"
        k = cfg.hoelder_k
        ref = cfg.oracle or (lambda x: mintime.evaluate_many(surface, x[None])[0])
        const = mintime.fit_hoelder(ref, samples, k)
        mod_source = "fit to oracle (estimate)" if cfg.oracle else "fit to discrete surface (estimate)"
    budget = mintime.ErrorBudget(kind, const, c_hp / h ** p, h, p, surface.delta_gamma, run.grid.dt, k)
    two = mintime.error_bound_two_dt(run, cfg.eps, c_hp)
    report = {
        "bound_general": mintime.error_bound_general(budget),
        "bound_two_dt": two.bound,
        "two_dt_certified": two.certified,
        "two_dt_warning": two.warning,
        "delta_gamma": surface.delta_gamma,
        "h": h,
        "p": p,
        "dt": run.grid.dt,
        "modulus": {"kind": kind, "constant": const, "k": k, "source": mod_source},
        "C_h_p": c_hp,
        "C_h_p_source": c_source,
        "n_triangles": int(len(surface.triangles)),
    }
    if cfg.oracle is not None:
        report["sup_error_empirical"] = mintime.sup_error_vs_oracle(surface, cfg.oracle, samples)
        report["oracle"] = cfg.oracle_name
    return report


def cmd_mintime(cfg: RunConfig) -> int:
    run = _run(cfg)
    surface = mintime.triangulate(run)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_off(cfg.out / "mesh.off", surface)
    write_surface_csv(cfg.out / "surface.csv", surface)
    report = error_report(cfg, run, surface)
    write_json(cfg.out / "error_report.json", report)
    _manifest(cfg, "mintime", run, ["mesh.off", "surface.csv", "error_report.json"])
    if not report["two_dt_certified"]:
        log.warning("2*dt bound not certified: %s", report["two_dt_warning"])
    print(f"T surface: {len(surface.triangles)} triangles, delta_gamma={surface.delta_gamma:.4g}, "
          f"bound_two_dt={report['bound_two_dt']:.4g}"
          + (f", sup_error={report['sup_error_empirical']:.4g}" if "sup_error_empirical" in report else ""))
    return EXIT_OK


def cmd_trajectory(cfg: RunConfig) -> int:
    if not cfg.system.time_invariant:
        raise UnsupportedError("trajectory reconstruction needs a time-invariant system")
    level = cfg.K if cfg.level is None else cfg.level
    if not 1 <= level <= cfg.K:
        raise ConfigError(f"level {level} out of range 1..{cfg.K}")
    run = _run(cfg, mode="global")
    k = cfg.direction_index
    if not 0 <= k < len(run.directions):
        raise ConfigError(f"direction index {k} out of range 0..{len(run.directions) - 1}")
    path = adjoint.reconstruct(run, level, k)
    warnings = list(path.notes)
    normal = adjoint.normality_check(run.system.A, run.system.B)
    if not normal:
        warnings.append("system is not normal (rank condition fails); L1 convergence of controls is not guaranteed")
    diam = run.fronts[level].polytope.diameter()
    report = {
        "level": level,
        "direction_index": k,
        "zeta": path.zeta,
        "endpoint": path.endpoint,
        "target": path.target,
        "endpoint_defect": path.defect,
        "endpoint_defect_relative": path.defect / diam if diam > 0 else path.defect,
        "pmp_check": adjoint.maximum_condition_check(path.switching, path.controls, run.U_delta),
        "switching_counts": adjoint.switching_counts(path.controls),
        "duality_gap": path.duality_gap(),
        "normal": normal,
        "singular_steps": path.singular_steps,
        "warnings": warnings,
    }
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(cfg.out / "trajectory.csv", path)
    write_json(cfg.out / "trajectory_report.json", report)
    _manifest(cfg, "trajectory", run, ["trajectory.csv", "trajectory_report.json"])
    for w in warnings:
        log.warning(w)
    print(f"defect={path.defect:.3g} pmp={report['pmp_check']} switches={report['switching_counts'].tolist()}")
    return EXIT_OK


def study_rows(cfg: RunConfig) -> list[dict]:
    vary = cfg.study.get("vary", "N")
    if vary not in ("N", "K"):
        raise ConfigError("study.vary must be 'N' or 'K'")
    ladder = cfg.study.get("ladder")
    if not isinstance(ladder, list) or len(ladder) < 3:
        raise ConfigError("study.ladder needs at least 3 refinement levels")
    ladder = sorted(int(v) for v in ladder)
    ref_val = cfg.study.get("reference")
    if ref_val is None:
        ref_val, ladder = ladder[-1], ladder[:-1]
        if len(ladder) < 2:
            raise ConfigError("study.ladder needs at least 3 entries when the finest one is the reference")

    def kn(v):
        return (cfg.K, v) if vary == "N" else (v, cfg.N)

    ref = _run(cfg, *kn(int(ref_val))).fronts[-1].polytope
    rows = []
    for v in ladder:
        r = _run(cfg, *kn(v))
        d = hausdorff_distance(r.fronts[-1].polytope, ref)
        d = float(d.upper if hasattr(d, "upper") else d)
        sup = None
        if cfg.oracle is not None and cfg.system.dim == 2:
            s = mintime.triangulate(r)
            sup = mintime.sup_error_vs_oracle(s, cfg.oracle, mintime.domain_samples(s, cfg.samples, cfg.seed))
        rows.append({"K": r.grid.K, "N": r.grid.N, "h": r.grid.h, "dt": r.grid.dt, "dH": d, "sup_err": sup})
    step = "h" if vary == "N" else "dt"
    for j, row in enumerate(rows):
        row["EOC"] = _eoc(rows, j, "dH", step)
        row["EOC_T"] = _eoc(rows, j, "sup_err", step) if row["sup_err"] is not None else None
    return rows


def _eoc(rows, j, key, step):
    e = rows[j][key]
    if j == 0:
        return "exact" if e <= 1e-13 else None
    a = rows[j - 1][key]
    if a <= 1e-13 and e <= 1e-13:
        return "exact"
    if e <= 0:
        return math.inf
    return math.log(a / e) / math.log(rows[j - 1][step] / rows[j][step])


def cmd_study(cfg: RunConfig) -> int:
    rows = study_rows(cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    cols = ["K", "N", "h", "dH", "EOC", "sup_err", "EOC_T"]
    write_csv(cfg.out / "study.csv", cols, ([r[c] for c in cols] for r in rows))
    print(f"{'K':>4} {'N':>5} {'h':>10} {'dH':>11} {'EOC':>7} {'sup_err':>11} {'EOC_T':>7}")
    for r in rows:
        def f(v, w, spec):
            return f"{v:>{w}}" if isinstance(v, str) else (" " * w if v is None else f"{v:>{w}{spec}}")
        print(f"{r['K']:>4} {r['N']:>5} {r['h']:>10.4g} {r['dH']:>11.4e} {f(r['EOC'], 7, '.3f')} "
              f"{f(r['sup_err'], 11, '.4e')} {f(r['EOC_T'], 7, '.3f')}")
    write_json(cfg.out / "manifest.json", {
        "command": "study",
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "version": _version(), "system": cfg.system_label, "scheme": cfg.scheme.name,
        "study": cfg.study, "n_directions": cfg.n_directions, "files": ["study.csv"],
    })
    return EXIT_OK


COMMANDS = {"reach": cmd_reach, "mintime": cmd_mintime, "trajectory": cmd_trajectory, "study": cmd_study}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reachtime", description="Reachable sets and minimum-time functions of linear control systems.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="run configuration (JSON)")
        s.add_argument("--out", help="output directory (default: config 'out' or ./out)")
        s.add_argument("--dirs", type=int, help="number of directions in the state grid")
        s.add_argument("--levels", type=int, help="number of coarse levels K")
        s.add_argument("--substeps", type=int, help="substeps N per level")
        s.add_argument("--scheme", choices=SCHEME_CHOICES)
        s.add_argument("--mode", choices=reach.MODES)
        if name == "trajectory":
            s.add_argument("--level", type=int, help="front level (default K)")
            s.add_argument("--direction", type=int, help="grid direction index of the vertex")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config, args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, UnsupportedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (StructuralError, PropagationError, GeometryError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
