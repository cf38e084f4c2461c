"""Serialisation of run results: CSV summaries and legacy VTK fields.

All numbers print with repr-exact precision (%.17g) and LF endings so
repeated runs produce byte-identical files; wall-clock columns are
zeroed unless timing output was explicitly requested.
"""
from __future__ import annotations

import numpy as np

from .mesh import ElementType, Mesh

CSV_HEADER = "step,time,min_c,max_c,n_below,n_above,qp_iters,wall_ms"

_VTK_CELL_TYPE = {ElementType.LINE2: 3, ElementType.TRI3: 5, ElementType.QUAD4: 9}


def _g(x: float) -> str:
    return "%.17g" % x


def _record_row(rec, timing: bool) -> str:
    wall = _g(rec.wall_ms) if timing else "0"
    return (f"{rec.step},{_g(rec.time)},{_g(rec.min_c)},{_g(rec.max_c)},"
            f"{rec.n_below},{rec.n_above},{rec.qp_iters},{wall}")


def write_history_csv(history, timing: bool = False) -> str:
    """Per-step summary of one run as CSV text."""
    lines = [CSV_HEADER]
    lines.extend(_record_row(r, timing) for r in history.records)
    return "\n".join(lines) + "\n"


def write_compare_csv(labelled_histories, timing: bool = False) -> str:
    """Step records of several schemes joined with scheme labels."""
    lines = ["scheme," + CSV_HEADER]
    for label, history in labelled_histories:
        lines.extend(f"{label},{_record_row(r, timing)}" for r in history.records)
    return "\n".join(lines) + "\n"


def write_vtk(mesh: Mesh, fields: dict, title: str = "dmpdiffuse") -> str:
    """Legacy ASCII VTK unstructured grid with nodal scalar fields."""
    for name, values in fields.items():
        if np.asarray(values).shape != (mesh.n_nodes,):
            raise ValueError(f"field {name!r} does not match mesh size")
    out = ["# vtk DataFile Version 3.0", title, "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_nodes} double"]
    for p in mesh.coords:
        y = p[1] if mesh.dim == 2 else 0.0
        out.append(f"{_g(p[0])} {_g(y)} 0")
    size = sum(len(conn) + 1 for _, conn in mesh.elements)
    out.append(f"CELLS {mesh.n_elements} {size}")
    for _, conn in mesh.elements:
        out.append(f"{len(conn)} " + " ".join(str(n) for n in conn))
    out.append(f"CELL_TYPES {mesh.n_elements}")
    out.extend(str(_VTK_CELL_TYPE[etype]) for etype, _ in mesh.elements)
    if fields:
        out.append(f"POINT_DATA {mesh.n_nodes}")
        for name in sorted(fields):
            out.append(f"SCALARS {name} double 1")
            out.append("LOOKUP_TABLE default")
            out.extend(_g(v) for v in np.asarray(fields[name], dtype=float))
    return "\n".join(out) + "\n"


def write_convergence_csv(rows) -> str:
    """Rows of (scheme, level, h, dt, n_nodes, l2, h1_semi) as CSV."""
    lines = ["scheme,level,h,dt,n_nodes,l2,h1_semi"]
    for scheme, level, h, dt, n_nodes, l2, h1 in rows:
        lines.append(f"{scheme},{level},{_g(h)},{_g(dt)},{n_nodes},"
                     f"{_g(l2)},{_g(h1)}")
    return "\n".join(lines) + "\n"


def format_rate_table(label, hs, l2_errors, h1_errors, l2_rates, h1_rates) -> str:
    """Aligned text table of errors and observed rates for one scheme."""
    lines = [label,
             f"{'h':>12} {'L2 error':>14} {'rate':>6} {'H1 error':>14} {'rate':>6}"]
    for k, h in enumerate(hs):
        r2 = f"{l2_rates[k - 1]:6.3f}" if k else "     -"
        r1 = f"{h1_rates[k - 1]:6.3f}" if k else "     -"
        lines.append(f"{h:12.6g} {l2_errors[k]:14.6e} {r2} "
                     f"{h1_errors[k]:14.6e} {r1}")
    return "\n".join(lines) + "\n"
