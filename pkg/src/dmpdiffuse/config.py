"""TOML run configuration: strict parsing and object construction.

Every key is checked against the schema; unknown keys are errors, not
warnings, so typos cannot silently fall back to defaults.
"""
from __future__ import annotations

from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:          # Python < 3.11
    import tomli as tomllib

from .mesh import (ElementType, Mesh, TriPattern, generate_interval_mesh,
                   generate_plate_with_hole_mesh, generate_structured_quad_mesh,
                   generate_structured_tri_mesh)
from .problems import ConstraintMode, ProblemSpec, built_in_problem
from .stepping import ProposedRothe, SchemeConfig, SingleField, WeightedRothe


class ConfigError(ValueError):
    """Invalid run configuration (bad TOML, unknown key, bad value)."""


_PROBLEM_KEYS = {"name", "end_time", "constraint_mode", "quad_order",
                 "a", "b", "k", "k1", "k2", "theta", "eps"}
_MESH_KEYS = {"kind", "n_elem", "length", "xseed", "yseed", "domain",
              "pattern", "seed", "elem", "path"}
_SCHEME_KEYS = {"kind", "gamma", "dt", "lumped", "rate_method",
                "constraint_mode", "label"}
_OUTPUT_KEYS = {"dir", "snapshot_times", "vtk", "timing"}
_CONVERGE_KEYS = {"levels", "dt0", "t_end"}
_MESH_KINDS = {
    "interval": {"n_elem", "length"},
    "structured_quad": {"xseed", "yseed", "domain"},
    "structured_tri": {"xseed", "yseed", "domain", "pattern"},
    "plate_hole": {"seed", "elem", "pattern"},
    "gmsh": {"path"},
}


@dataclass
class RunConfig:
    problem: ProblemSpec
    problem_name: str
    mesh: Mesh
    mesh_spec: dict
    schemes: list
    scheme_labels: list
    quad_order: int = 2
    out_dir: str = "."
    snapshot_times: list = field(default_factory=list)
    vtk: bool = False
    timing: bool = False
    converge: dict = None


def _unknown(section, given, allowed):
    extra = sorted(set(given) - allowed)
    if extra:
        where = f"{section}." if section else ""
        raise ConfigError(f"unknown key{'s' if len(extra) > 1 else ''} "
                          + ", ".join(f"{where}{k}" for k in extra))


def _need(table, section, key, types, what):
    if key not in table:
        raise ConfigError(f"missing required key {section}.{key}")
    return _typed(table, section, key, types, what)


def _typed(table, section, key, types, what, default=None):
    if key not in table:
        return default
    val = table[key]
    if isinstance(val, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ConfigError(f"{section}.{key} must be {what}, got a boolean")
    if not isinstance(val, types):
        raise ConfigError(f"{section}.{key} must be {what}, got {val!r}")
    return val


def _enum(table, section, key, mapping, default=None):
    if key not in table:
        return default
    val = _typed(table, section, key, str, "a string")
    try:
        return mapping(val)
    except ValueError:
        choices = ", ".join(sorted(m.value for m in mapping))
        raise ConfigError(f"{section}.{key} must be one of {choices}, "
                          f"got {val!r}") from None


def build_mesh(spec: dict) -> Mesh:
    """Construct the mesh described by a validated [mesh] table."""
    kind = spec["kind"]
    try:
        if kind == "interval":
            return generate_interval_mesh(spec.get("n_elem", 10),
                                          spec.get("length", 1.0))
        if kind == "structured_quad":
            return generate_structured_quad_mesh(
                spec.get("xseed", 11), spec.get("yseed", 11),
                tuple(spec.get("domain", (0.0, 0.0, 1.0, 1.0))))
        if kind == "structured_tri":
            return generate_structured_tri_mesh(
                spec.get("xseed", 11), spec.get("yseed", 11),
                tuple(spec.get("domain", (0.0, 0.0, 1.0, 1.0))),
                spec.get("pattern", TriPattern.RIGHT_DIAGONAL))
        if kind == "plate_hole":
            return generate_plate_with_hole_mesh(
                spec.get("seed", 21), spec.get("elem", ElementType.QUAD4),
                spec.get("pattern", TriPattern.RIGHT_DIAGONAL))
        if kind == "gmsh":
            from .gmsh_io import read_gmsh
            with open(spec["path"], encoding="utf-8") as fh:
                return read_gmsh(fh.read())
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot build mesh: {exc}") from exc
    raise ConfigError(f"mesh.kind must be one of {sorted(_MESH_KINDS)}, "
                      f"got {kind!r}")


def _parse_mesh(table) -> dict:
    _unknown("mesh", table, _MESH_KEYS)
    kind = _need(table, "mesh", "kind", str, "a string")
    if kind not in _MESH_KINDS:
        raise ConfigError(f"mesh.kind must be one of {sorted(_MESH_KINDS)}, "
                          f"got {kind!r}")
    allowed = _MESH_KINDS[kind] | {"kind"}
    stray = sorted(set(table) - allowed)
    if stray:
        if "path" in stray or kind == "gmsh":
            raise ConfigError("mesh.path and generator parameters are "
                              "mutually exclusive; give one mesh source")
        raise ConfigError(f"mesh.{stray[0]} does not apply to kind {kind!r}")
    spec = {"kind": kind}
    if kind == "interval":
        spec["n_elem"] = _typed(table, "mesh", "n_elem", int, "an integer", 10)
        spec["length"] = float(_typed(table, "mesh", "length", (int, float),
                                      "a number", 1.0))
    elif kind in ("structured_quad", "structured_tri"):
        spec["xseed"] = _typed(table, "mesh", "xseed", int, "an integer", 11)
        spec["yseed"] = _typed(table, "mesh", "yseed", int, "an integer", 11)
        dom = table.get("domain", [0.0, 0.0, 1.0, 1.0])
        if (not isinstance(dom, list) or len(dom) != 4
                or not all(isinstance(v, (int, float)) for v in dom)):
            raise ConfigError("mesh.domain must be [x0, y0, x1, y1]")
        spec["domain"] = tuple(float(v) for v in dom)
        if kind == "structured_tri":
            spec["pattern"] = _enum(table, "mesh", "pattern", TriPattern,
                                    TriPattern.RIGHT_DIAGONAL)
    elif kind == "plate_hole":
        spec["seed"] = _typed(table, "mesh", "seed", int, "an integer", 21)
        spec["elem"] = _enum(table, "mesh", "elem", ElementType,
                             ElementType.QUAD4)
        spec["pattern"] = _enum(table, "mesh", "pattern", TriPattern,
                                TriPattern.RIGHT_DIAGONAL)
    else:  # gmsh
        spec["path"] = _need(table, "mesh", "path", str, "a string")
    return spec


def _parse_scheme(table, index) -> tuple:
    section = f"schemes[{index}]"
    _unknown(section, table, _SCHEME_KEYS)
    kind = _need(table, section, "kind", str, "a string")
    gamma = float(_typed(table, section, "gamma", (int, float), "a number", 1.0))
    dt = float(_need(table, section, "dt", (int, float), "a number"))
    mode = _enum(table, section, "constraint_mode", ConstraintMode)
    if not 0.0 < gamma <= 1.0:
        raise ConfigError(f"{section}.gamma must lie in (0, 1], got {gamma}")
    if kind == "proposed":
        if "lumped" in table:
            raise ConfigError(f"{section}.lumped only applies to single_field")
        rm = _typed(table, section, "rate_method", str, "a string", "weighted")
        if rm not in ("direct", "weighted"):
            raise ConfigError(f"{section}.rate_method must be direct or "
                              f"weighted, got {rm!r}")
        scheme = ProposedRothe(gamma, rm)
        label = f"proposed_g{gamma:g}"
    elif kind == "weighted":
        for bad in ("lumped", "rate_method"):
            if bad in table:
                raise ConfigError(f"{section}.{bad} does not apply to weighted")
        scheme = WeightedRothe(gamma)
        label = f"weighted_g{gamma:g}"
    elif kind == "single_field":
        if "rate_method" in table:
            raise ConfigError(f"{section}.rate_method only applies to proposed")
        lumped = _typed(table, section, "lumped", bool, "a boolean", False)
        scheme = SingleField(gamma, lumped)
        label = f"single_field_{'lumped' if lumped else 'consistent'}_g{gamma:g}"
    else:
        raise ConfigError(f"{section}.kind must be proposed, weighted or "
                          f"single_field, got {kind!r}")
    if not dt > 0:
        raise ConfigError(f"{section}.dt must be positive, got {dt}")
    label = _typed(table, section, "label", str, "a string", label)
    return scheme, dt, mode, label


def parse_config(text: str) -> RunConfig:
    """Parse a TOML run configuration; raises ConfigError on anything
    outside the documented schema."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc

    _unknown("", data, {"problem", "mesh", "schemes", "output", "converge"})
    for req in ("problem", "mesh", "schemes"):
        if req not in data:
            raise ConfigError(f"missing required section [{req}]")
    if not isinstance(data["problem"], dict) or not isinstance(data["mesh"], dict):
        raise ConfigError("[problem] and [mesh] must be tables")
    if not isinstance(data["schemes"], list) or not data["schemes"]:
        raise ConfigError("[[schemes]] must appear at least once")

    ptab = data["problem"]
    _unknown("problem", ptab, _PROBLEM_KEYS)
    name = _need(ptab, "problem", "name", str, "a string")
    quad_order = _typed(ptab, "problem", "quad_order", int, "an integer", 2)
    if quad_order not in (1, 2, 3):
        raise ConfigError(f"problem.quad_order must be 1, 2 or 3, got {quad_order}")
    overrides = {}
    for key in ("end_time", "a", "b", "k", "k1", "k2", "theta", "eps"):
        if key in ptab:
            overrides[key] = float(_typed(ptab, "problem", key, (int, float),
                                          "a number"))
    mode = _enum(ptab, "problem", "constraint_mode", ConstraintMode)
    if mode is not None:
        overrides["constraint_mode"] = mode
    try:
        problem = built_in_problem(name, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    mesh_spec = _parse_mesh(data["mesh"])
    mesh = build_mesh(mesh_spec)

    schemes, labels = [], []
    for i, stab in enumerate(data["schemes"]):
        if not isinstance(stab, dict):
            raise ConfigError(f"schemes[{i}] must be a table")
        try:
            scheme, dt, smode, label = _parse_scheme(stab, i)
            schemes.append(SchemeConfig(scheme, dt, smode, quad_order))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        while label in labels:
            label += "_x"
        labels.append(label)

    out_dir, snaps, vtk, timing = ".", [], False, False
    if "output" in data:
        otab = data["output"]
        _unknown("output", otab, _OUTPUT_KEYS)
        out_dir = _typed(otab, "output", "dir", str, "a string", ".")
        snaps = otab.get("snapshot_times", [])
        if (not isinstance(snaps, list)
                or not all(isinstance(v, (int, float)) for v in snaps)):
            raise ConfigError("output.snapshot_times must be a list of numbers")
        snaps = [float(v) for v in snaps]
        vtk = _typed(otab, "output", "vtk", bool, "a boolean", False)
        timing = _typed(otab, "output", "timing", bool, "a boolean", False)

    converge = None
    if "converge" in data:
        ctab = data["converge"]
        _unknown("converge", ctab, _CONVERGE_KEYS)
        converge = {
            "levels": _typed(ctab, "converge", "levels", int, "an integer", 3),
            "dt0": float(_typed(ctab, "converge", "dt0", (int, float),
                                "a number", 1e-3)),
            "t_end": float(_typed(ctab, "converge", "t_end", (int, float),
                                  "a number", 0.01)),
        }
        if converge["levels"] < 2:
            raise ConfigError("converge.levels must be at least 2")
        if converge["dt0"] <= 0 or converge["t_end"] <= 0:
            raise ConfigError("converge.dt0 and converge.t_end must be positive")

    return RunConfig(problem=problem, problem_name=name, mesh=mesh,
                     mesh_spec=mesh_spec, schemes=schemes, scheme_labels=labels,
                     quad_order=quad_order, out_dir=out_dir,
                     snapshot_times=snaps, vtk=vtk, timing=timing,
                     converge=converge)
