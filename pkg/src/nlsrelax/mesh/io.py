"""Mesh interchange: Gmsh MSH 2.2 ASCII and a plain-text dump."""
from __future__ import annotations

import io

import numpy as np

from .core import DIRICHLET, NEUMANN, Mesh, MeshError

PHYSICAL_TAG = {DIRICHLET: 1, NEUMANN: 2}
_TAG_FROM_PHYSICAL = {v: k for k, v in PHYSICAL_TAG.items()}


class MshParseError(MeshError):
    """Malformed MSH input; ``line`` is the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _text(stream) -> str:
    if isinstance(stream, (bytes, bytearray)):
        return stream.decode("ascii")
    if isinstance(stream, str):
        return stream
    data = stream.read()
    return data.decode("ascii") if isinstance(data, bytes) else data


def export_msh(mesh: Mesh) -> str:
    out = io.StringIO()
    out.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
    out.write(f"$Nodes\n{len(mesh.points)}\n")
    for i, (x, y) in enumerate(mesh.points, start=1):
        out.write(f"{i} {x:.17g} {y:.17g} 0\n")
    out.write("$EndNodes\n")
    n_el = len(mesh.boundary_edges) + len(mesh.triangles)
    out.write(f"$Elements\n{n_el}\n")
    k = 1
    for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        phys = PHYSICAL_TAG[str(tag)]
        out.write(f"{k} 1 2 {phys} {phys} {a + 1} {b + 1}\n")
        k += 1
    for a, b, c in mesh.triangles:
        out.write(f"{k} 2 2 0 1 {a + 1} {b + 1} {c + 1}\n")
        k += 1
    out.write("$EndElements\n")
    return out.getvalue()


def import_msh(stream) -> Mesh:
    """Parse the MSH 2.2 ASCII subset: 2-node lines and 3-node triangles.

    Line elements carry the boundary tag in their physical group
    (1 = Dirichlet, 2 = Neumann). Nodes may be numbered arbitrarily.
    """
    lines = _text(stream).splitlines()
    pos = 0
    node_index: dict[int, int] = {}
    coords: list[tuple[float, float]] = []
    raw_tris: list[tuple[int, list[int]]] = []
    raw_lines: list[tuple[int, int, list[int]]] = []
    seen_nodes = seen_elements = False

    def expect_int(i):
        try:
            return int(lines[i].split()[0])
        except (IndexError, ValueError):
            raise MshParseError("expected an entry count", i + 1) from None

    while pos < len(lines):
        head = lines[pos].strip()
        if head == "$MeshFormat":
            parts = lines[pos + 1].split() if pos + 1 < len(lines) else []
            if len(parts) < 3 or not parts[0].startswith("2") or parts[1] != "0":
                raise MshParseError("only ASCII MSH version 2.x is supported", pos + 2)
            if pos + 2 >= len(lines) or lines[pos + 2].strip() != "$EndMeshFormat":
                raise MshParseError("missing $EndMeshFormat", pos + 3)
            pos += 3
        elif head == "$Nodes":
            n = expect_int(pos + 1)
            for i in range(pos + 2, pos + 2 + n):
                if i >= len(lines):
                    raise MshParseError("unexpected end of file in $Nodes", i + 1)
                parts = lines[i].split()
                try:
                    tag, x, y = int(parts[0]), float(parts[1]), float(parts[2])
                except (IndexError, ValueError):
                    raise MshParseError("malformed node line", i + 1) from None
                if tag in node_index:
                    raise MshParseError(f"duplicate node {tag}", i + 1)
                node_index[tag] = len(coords)
                coords.append((x, y))
            end = pos + 2 + n
            if end >= len(lines) or lines[end].strip() != "$EndNodes":
                raise MshParseError("missing $EndNodes", end + 1)
            pos = end + 1
            seen_nodes = True
        elif head == "$Elements":
            n = expect_int(pos + 1)
            for i in range(pos + 2, pos + 2 + n):
                if i >= len(lines):
                    raise MshParseError("unexpected end of file in $Elements", i + 1)
                try:
                    parts = [int(v) for v in lines[i].split()]
                    etype, ntags = parts[1], parts[2]
                except (IndexError, ValueError):
                    raise MshParseError("malformed element line", i + 1) from None
                tags = parts[3:3 + ntags]
                nodes = parts[3 + ntags:]
                phys = tags[0] if tags else 0
                if etype == 1:
                    if len(nodes) != 2:
                        raise MshParseError("line element needs 2 nodes", i + 1)
                    raw_lines.append((i + 1, phys, nodes))
                elif etype == 2:
                    if len(nodes) != 3:
                        raise MshParseError("triangle element needs 3 nodes", i + 1)
                    raw_tris.append((i + 1, nodes))
                elif etype == 15:
                    continue  # point elements carry no connectivity
                else:
                    raise MshParseError(f"unsupported element type {etype}", i + 1)
            end = pos + 2 + n
            if end >= len(lines) or lines[end].strip() != "$EndElements":
                raise MshParseError("missing $EndElements", end + 1)
            pos = end + 1
            seen_elements = True
        elif head.startswith("$"):
            name = head[1:]
            while pos < len(lines) and lines[pos].strip() != f"$End{name}":
                pos += 1
            if pos == len(lines):
                raise MshParseError(f"unterminated section ${name}")
            pos += 1
        elif head == "":
            pos += 1
        else:
            raise MshParseError(f"unexpected content {head[:30]!r}", pos + 1)

    if not (seen_nodes and seen_elements):
        raise MshParseError("file needs both $Nodes and $Elements sections")

    def resolve(lineno, nodes):
        try:
            return [node_index[v] for v in nodes]
        except KeyError as exc:
            raise MshParseError(f"element references unknown node {exc.args[0]}", lineno) from None

    points = np.array(coords, dtype=float)
    triangles = []
    for lineno, nodes in raw_tris:
        a, b, c = resolve(lineno, nodes)
        pa, pb, pc = points[a], points[b], points[c]
        area2 = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])
        if area2 == 0:
            raise MshParseError("degenerate triangle", lineno)
        triangles.append((a, b, c) if area2 > 0 else (a, c, b))
    tags = {}
    for lineno, phys, nodes in raw_lines:
        if phys not in _TAG_FROM_PHYSICAL:
            raise MshParseError(f"unknown physical group {phys} on boundary line", lineno)
        a, b = resolve(lineno, nodes)
        tags[(a, b)] = _TAG_FROM_PHYSICAL[phys]
    try:
        mesh = Mesh(points, triangles, tags)
    except MeshError as exc:
        raise MshParseError(str(exc)) from exc
    boundary = {tuple(sorted(map(int, e))) for e in mesh.boundary_edges}
    for key in tags:
        if tuple(sorted(key)) not in boundary:
            raise MshParseError(f"line element {key[0] + 1}-{key[1] + 1} is not a boundary edge")
    return mesh


def dump_text(mesh: Mesh) -> str:
    """``p x y`` / ``t i j k`` / ``b i j D|N`` lines, 0-based indices."""
    out = [f"p {x:.17g} {y:.17g}" for x, y in mesh.points]
    out += [f"t {a} {b} {c}" for a, b, c in mesh.triangles]
    out += [f"b {a} {b} {t}" for (a, b), t in zip(mesh.boundary_edges, mesh.boundary_tags)]
    return "\n".join(out) + "\n"


def load_text(text: str) -> Mesh:
    points, triangles, tags = [], [], {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "p":
                points.append((float(parts[1]), float(parts[2])))
            elif parts[0] == "t":
                triangles.append((int(parts[1]), int(parts[2]), int(parts[3])))
            elif parts[0] == "b":
                tags[(int(parts[1]), int(parts[2]))] = parts[3]
            else:
                raise ValueError(parts[0])
        except (IndexError, ValueError):
            raise MshParseError("malformed mesh dump line", lineno) from None
    return Mesh(points, triangles, tags)


def write_mesh(mesh: Mesh, path) -> None:
    path = str(path)
    text = export_msh(mesh) if path.endswith(".msh") else dump_text(mesh)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)


def read_mesh(path) -> Mesh:
    with open(path, encoding="ascii") as fh:
        text = fh.read()
    return import_msh(text) if str(path).endswith(".msh") else load_text(text)
