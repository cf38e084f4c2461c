"""Reading and writing Gmsh MSH 2.2 ASCII meshes.

Only the element codes used by this package are handled: 1 (2-node
line), 2 (3-node triangle), 3 (4-node quad).  In a mesh containing
triangles or quads, line elements are interpreted as tagged boundary
edges; a mesh of line elements only is a 1D interval mesh (point
elements, code 15, are rejected, so 1D meshes carry no node tags).
"""
from __future__ import annotations

import numpy as np

from .mesh import ElementType, Mesh


class MshParseError(ValueError):
    """Malformed MSH input; message carries the 1-based line number."""

    def __init__(self, lineno, msg):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class UnsupportedElementError(MshParseError):
    """Element code other than 1, 2 or 3 in the file."""


_CODE_TO_TYPE = {1: ElementType.LINE2, 2: ElementType.TRI3, 3: ElementType.QUAD4}
_TYPE_TO_CODE = {v: k for k, v in _CODE_TO_TYPE.items()}
_CODE_NNODES = {1: 2, 2: 3, 3: 4}


def read_gmsh(text: str) -> Mesh:
    """Parse MSH 2.2 ASCII content into a Mesh."""
    lines = text.splitlines()
    sections = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if line.startswith("$") and not line.startswith("$End"):
            name = line[1:]
            end = f"$End{name}"
            j = i + 1
            while j < len(lines) and lines[j].strip() != end:
                j += 1
            if j == len(lines):
                raise MshParseError(i + 1, f"unterminated section ${name}")
            sections[name] = (i + 1, lines[i + 1:j])  # (base lineno, body)
            i = j + 1
        elif line:
            raise MshParseError(i + 1, f"unexpected content {line!r}")
        else:
            i += 1

    if "MeshFormat" not in sections:
        raise MshParseError(1, "missing $MeshFormat")
    base, body = sections["MeshFormat"]
    fields = body[0].split()
    if not fields or not fields[0].startswith("2.2"):
        raise MshParseError(base + 1, f"unsupported MSH version {body[0]!r}")
    if len(fields) >= 2 and fields[1] != "0":
        raise MshParseError(base + 1, "binary MSH files are not supported")

    phys_names = {}
    if "PhysicalNames" in sections:
        base, body = sections["PhysicalNames"]
        try:
            count = int(body[0])
        except (IndexError, ValueError):
            raise MshParseError(base + 1, "bad $PhysicalNames count") from None
        for k in range(count):
            parts = body[1 + k].split(None, 2)
            if len(parts) != 3:
                raise MshParseError(base + 2 + k, "bad physical name record")
            phys_names[int(parts[1])] = parts[2].strip().strip('"')

    if "Nodes" not in sections:
        raise MshParseError(1, "missing $Nodes")
    base, body = sections["Nodes"]
    try:
        n_nodes = int(body[0])
    except (IndexError, ValueError):
        raise MshParseError(base + 1, "bad $Nodes count") from None
    if len(body) < 1 + n_nodes:
        raise MshParseError(base + 1, f"expected {n_nodes} node records")
    id_to_idx = {}
    xyz = np.empty((n_nodes, 3))
    for k in range(n_nodes):
        parts = body[1 + k].split()
        if len(parts) != 4:
            raise MshParseError(base + 2 + k, f"bad node record {body[1 + k]!r}")
        try:
            nid = int(parts[0])
            xyz[k] = [float(p) for p in parts[1:]]
        except ValueError:
            raise MshParseError(base + 2 + k, f"bad node record {body[1 + k]!r}") from None
        if nid in id_to_idx:
            raise MshParseError(base + 2 + k, f"duplicate node id {nid}")
        id_to_idx[nid] = k
    if np.any(xyz[:, 2] != 0.0):
        raise MshParseError(base + 1, "3D meshes (non-zero z) are not supported")

    if "Elements" not in sections:
        raise MshParseError(1, "missing $Elements")
    base, body = sections["Elements"]
    try:
        n_elems = int(body[0])
    except (IndexError, ValueError):
        raise MshParseError(base + 1, "bad $Elements count") from None
    if len(body) < 1 + n_elems:
        raise MshParseError(base + 1, f"expected {n_elems} element records")

    domain = []         # (ElementType, conn)
    edge_records = []   # ((a, b), physical tag id)
    for k in range(n_elems):
        lineno = base + 2 + k
        parts = body[1 + k].split()
        try:
            ints = [int(p) for p in parts]
            code, ntags = ints[1], ints[2]
        except (ValueError, IndexError):
            raise MshParseError(lineno, f"bad element record {body[1 + k]!r}") from None
        if code not in _CODE_TO_TYPE:
            raise UnsupportedElementError(lineno, f"unsupported element code {code}")
        nn = _CODE_NNODES[code]
        if len(ints) != 3 + ntags + nn:
            raise MshParseError(lineno, "element record length mismatch")
        tags = ints[3:3 + ntags]
        try:
            conn = tuple(id_to_idx[n] for n in ints[3 + ntags:])
        except KeyError as exc:
            raise MshParseError(lineno, f"element references missing node {exc}") from None
        etype = _CODE_TO_TYPE[code]
        if etype is ElementType.LINE2:
            edge_records.append((conn, tags[0] if tags else 0))
        else:
            domain.append((etype, conn))

    if domain:
        coords = xyz[:, :2]
        boundary_edges = []
        node_tags = {}
        for conn, tag_id in edge_records:
            name = phys_names.get(tag_id, str(tag_id))
            boundary_edges.append((conn, name))
            node_tags.setdefault(name, set()).update(conn)
    else:
        # pure line mesh: a 1D interval discretisation
        if np.any(xyz[:, 1] != 0.0):
            raise MshParseError(1, "line-only mesh with non-zero y coordinates")
        coords = xyz[:, :1]
        domain = [(ElementType.LINE2, conn) for conn, _ in edge_records]
        boundary_edges = []
        node_tags = {}

    mesh = Mesh(coords, domain, boundary_edges, node_tags)
    from .mesh import _check_jacobians

    _check_jacobians(mesh)
    return mesh


def write_gmsh(mesh: Mesh) -> str:
    """Serialise a Mesh as MSH 2.2 ASCII; inverse of read_gmsh."""
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat"]

    edge_tags = sorted({tag for _, tag in mesh.boundary_edges})
    tag_ids = {tag: i + 1 for i, tag in enumerate(edge_tags)}
    if edge_tags:
        out.append("$PhysicalNames")
        out.append(str(len(edge_tags)))
        for tag in edge_tags:
            out.append(f'1 {tag_ids[tag]} "{tag}"')
        out.append("$EndPhysicalNames")

    out.append("$Nodes")
    out.append(str(mesh.n_nodes))
    for k in range(mesh.n_nodes):
        p = mesh.coords[k]
        y = p[1] if mesh.dim == 2 else 0.0
        out.append("%d %.17g %.17g %.17g" % (k + 1, p[0], y, 0.0))
    out.append("$EndNodes")

    out.append("$Elements")
    records = []
    eid = 1
    for (a, b), tag in mesh.boundary_edges:
        records.append(f"{eid} 1 2 {tag_ids[tag]} {tag_ids[tag]} {a + 1} {b + 1}")
        eid += 1
    for etype, conn in mesh.elements:
        nodes = " ".join(str(n + 1) for n in conn)
        records.append(f"{eid} {_TYPE_TO_CODE[etype]} 2 0 0 {nodes}")
        eid += 1
    out.append(str(len(records)))
    out.extend(records)
    out.append("$EndElements")
    return "\n".join(out) + "\n"
