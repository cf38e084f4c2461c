"""Command-line interface.

    dmpdiffuse run       --config run.toml [--out DIR]
    dmpdiffuse compare   --config run.toml [--out DIR]
    dmpdiffuse converge  --config run.toml [--out DIR]
    dmpdiffuse mesh-gen  --config run.toml [--out DIR]

Exit codes: 0 success, 1 solver failure, 2 configuration/usage error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import output
from .boxqp import NotSPDError, QPNoConvergenceError
from .config import ConfigError, RunConfig, build_mesh, parse_config
from .diagnostics import convergence_rates, error_norms
from .elements import DegenerateElementError
from .gmsh_io import MshParseError, write_gmsh
from .stepping import run_transient

_SOLVER_ERRORS = (QPNoConvergenceError, NotSPDError, DegenerateElementError,
                  np.linalg.LinAlgError, ArithmeticError)


def _load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _outdir(cfg: RunConfig, args) -> Path:
    out = Path(args.out if args.out else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    print(f"wrote {path}")


def _run_one(cfg: RunConfig, scheme_cfg, label, out: Path):
    history = run_transient(cfg.mesh, cfg.problem, scheme_cfg,
                            snapshot_times=cfg.snapshot_times)
    base = f"{cfg.problem_name}_{label}"
    _write(out / f"{base}.csv", output.write_history_csv(history, cfg.timing))
    if cfg.vtk:
        for i, (t, c) in enumerate(history.snapshots):
            text = output.write_vtk(cfg.mesh, {"concentration": c},
                                    title=f"{base} t={t:.12g}")
            _write(out / f"{base}_{i:03d}.vtk", text)
    return history


def _cmd_run(cfg: RunConfig, args) -> int:
    if len(cfg.schemes) != 1:
        raise ConfigError("run expects exactly one [[schemes]] entry; "
                          "use compare for several")
    out = _outdir(cfg, args)
    history = _run_one(cfg, cfg.schemes[0], cfg.scheme_labels[0], out)
    last = history.records[-1]
    print(f"{cfg.problem_name}: {len(history.records)} steps to "
          f"t={last.time:.12g}, min={last.min_c:.6e}, max={last.max_c:.6e}")
    return 0


def _cmd_compare(cfg: RunConfig, args) -> int:
    if len(cfg.schemes) < 2:
        raise ConfigError("compare expects at least two [[schemes]] entries")
    out = _outdir(cfg, args)
    labelled = []
    summary = []
    for scheme_cfg, label in zip(cfg.schemes, cfg.scheme_labels):
        history = run_transient(cfg.mesh, cfg.problem, scheme_cfg,
                                snapshot_times=cfg.snapshot_times)
        labelled.append((label, history))
        below = sum(r.n_below for r in history.records)
        above = sum(r.n_above for r in history.records)
        summary.append(
            f"{label}: global min {history.min_values().min():.6e}, "
            f"global max {history.max_values().max():.6e}, "
            f"node-steps below {below}, above {above}")
    _write(out / f"{cfg.problem_name}_compare.csv",
           output.write_compare_csv(labelled, cfg.timing))
    _write(out / f"{cfg.problem_name}_summary.txt", "\n".join(summary) + "\n")
    for line in summary:
        print(line)
    return 0


def _refined_spec(spec: dict, level: int) -> dict:
    """The [mesh] table scaled to refinement level `level` (cells double)."""
    spec = dict(spec)
    factor = 2 ** level
    if spec["kind"] == "interval":
        spec["n_elem"] = spec.get("n_elem", 10) * factor
    elif spec["kind"] in ("structured_quad", "structured_tri"):
        spec["xseed"] = (spec.get("xseed", 11) - 1) * factor + 1
        spec["yseed"] = (spec.get("yseed", 11) - 1) * factor + 1
    else:
        raise ConfigError(f"mesh kind {spec['kind']!r} has no refinement "
                          "hierarchy; converge needs interval or structured")
    return spec


def _mesh_spacing(spec: dict) -> float:
    if spec["kind"] == "interval":
        return spec.get("length", 1.0) / spec["n_elem"]
    x0, _, x1, _ = spec.get("domain", (0.0, 0.0, 1.0, 1.0))
    return (x1 - x0) / (spec["xseed"] - 1)


def _cmd_converge(cfg: RunConfig, args) -> int:
    if cfg.converge is None:
        raise ConfigError("converge requires a [converge] section")
    if cfg.problem.analytic is None:
        raise ConfigError(f"problem {cfg.problem_name!r} has no analytic "
                          "solution to measure errors against")
    out = _outdir(cfg, args)
    levels = cfg.converge["levels"]
    dt0, t_end = cfg.converge["dt0"], cfg.converge["t_end"]
    rows = []
    report = []
    for scheme_cfg, label in zip(cfg.schemes, cfg.scheme_labels):
        hs, l2s, h1s = [], [], []
        for level in range(levels):
            spec = _refined_spec(cfg.mesh_spec, level)
            mesh = build_mesh(spec)
            dt = dt0 / 4.0 ** level
            run_cfg = type(scheme_cfg)(scheme_cfg.scheme, dt,
                                       scheme_cfg.constraint_mode,
                                       scheme_cfg.quad_order)
            history = run_transient(mesh, cfg.problem, run_cfg, t_end=t_end,
                                    snapshot_times=[t_end],
                                    project_initial=True)
            _, c = history.snapshots[-1]
            err = error_norms(mesh, c, cfg.problem.analytic, t_end)
            h = _mesh_spacing(spec)
            hs.append(h)
            l2s.append(err.l2)
            h1s.append(err.h1_semi)
            rows.append((label, level, h, dt, mesh.n_nodes, err.l2, err.h1_semi))
        l2r = convergence_rates(l2s, hs)
        h1r = convergence_rates(h1s, hs)
        report.append(output.format_rate_table(label, hs, l2s, h1s, l2r, h1r))
    _write(out / f"{cfg.problem_name}_converge.csv",
           output.write_convergence_csv(rows))
    text = "\n".join(report)
    _write(out / f"{cfg.problem_name}_rates.txt", text)
    print(text, end="")
    return 0


def _cmd_mesh_gen(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args)
    _write(out / f"{cfg.problem_name}_mesh.msh", write_gmsh(cfg.mesh))
    print(f"{cfg.mesh.n_nodes} nodes, {cfg.mesh.n_elements} elements")
    return 0


_COMMANDS = {"run": _cmd_run, "compare": _cmd_compare,
             "converge": _cmd_converge, "mesh-gen": _cmd_mesh_gen}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dmpdiffuse",
        description="Bound-preserving finite element diffusion solver")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=None, help="output directory override")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = _load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, MshParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
