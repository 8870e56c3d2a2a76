"""Serialisation of diagnostics, snapshots, solver states and cross sections.

All floating point output uses 17 significant digits so values round-trip.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import fem
from .mesh import Mesh
from .stepper import DiagnosticsRecord, RelaxationState

STATE_FORMAT = "nlsrelax-state"


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    data = [[float(v) if v else np.nan for v in row] for row in rows[1:]]  # empty cells read as nan
    return rows[0], np.array(data, dtype=float).reshape(-1, len(rows[0]))


def write_diagnostics(path, records: list[DiagnosticsRecord]) -> None:
    write_csv(path, ["t", "mass", "energy"], [(r.t, r.mass, r.energy) for r in records])


def write_snapshot_csv(path, field: fem.Field) -> None:
    """One row per DOF: x, y, re, im, abs (constrained DOFs included as zeros)."""
    u = field.full().astype(complex)
    xy = field.space.dof_coords
    write_csv(path, ["x", "y", "re", "im", "abs"],
              zip(xy[:, 0], xy[:, 1], u.real, u.imag, np.abs(u)))


def _vtk_triangles(space: fem.FESpace) -> np.ndarray:
    if space.degree == 1:
        return space.dof_map
    d = space.dof_map
    # split each P2 triangle into four linear ones through its edge nodes
    return np.concatenate([d[:, [0, 3, 5]], d[:, [3, 1, 4]], d[:, [5, 4, 2]], d[:, [3, 4, 5]]])


def write_vtk(path, field: fem.Field, title: str = "nlsrelax snapshot") -> None:
    """Legacy VTK ASCII unstructured grid with |u|, Re u and Im u point data."""
    space = field.space
    u = field.full().astype(complex)
    cells = _vtk_triangles(space)
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {space.n_dofs} double"]
    lines += [f"{fmt(x)} {fmt(y)} 0" for x, y in space.dof_coords]
    lines.append(f"CELLS {len(cells)} {4 * len(cells)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in cells]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += ["5"] * len(cells)
    lines.append(f"POINT_DATA {space.n_dofs}")
    for name, vals in (("abs", np.abs(u)), ("re", u.real), ("im", u.imag)):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [fmt(v) for v in vals]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def save_state(path, state: RelaxationState, lam: float | None = None) -> None:
    space = state.space
    mesh = space.mesh
    doc = {
        "format": STATE_FORMAT,
        "version": 1,
        "degree": space.degree,
        "n": state.n,
        "k": state.k,
        "t": state.t,
        "lam": lam,
        "mesh": {
            "points": mesh.points.tolist(),
            "triangles": mesh.triangles.tolist(),
            "boundary": [[int(a), int(b), str(t)] for (a, b), t in zip(mesh.boundary_edges, mesh.boundary_tags)],
        },
        "U_re": state.U.coeffs.real.tolist(),
        "U_im": np.asarray(state.U.coeffs).imag.tolist(),
        "Phi": state.Phi.coeffs.tolist(),
    }
    Path(path).write_text(json.dumps(doc), encoding="ascii")


class StateFormatError(ValueError):
    pass


def load_state(path) -> RelaxationState:
    try:
        doc = json.loads(Path(path).read_text(encoding="ascii"))
    except (OSError, UnicodeDecodeError) as exc:
        raise StateFormatError(f"cannot read state file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StateFormatError(f"state file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != STATE_FORMAT:
        raise StateFormatError(f"{path} is not a {STATE_FORMAT} file")
    try:
        m = doc["mesh"]
        mesh = Mesh(m["points"], m["triangles"], {(a, b): t for a, b, t in m["boundary"]})
        space = fem.build_space(mesh, int(doc["degree"]))
        U = np.array(doc["U_re"], dtype=float) + 1j * np.array(doc["U_im"], dtype=float)
        phi = np.array(doc["Phi"], dtype=float)
        return RelaxationState(fem.Field(space, U), fem.Field(space, phi), int(doc["n"]), float(doc["k"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise StateFormatError(f"malformed state file {path}: {exc}") from exc


def write_cross_section(path, section: np.ndarray) -> None:
    """Columns x, re, im, abs."""
    write_csv(path, ["x", "re", "im", "abs"], section[:, [0, 2, 3, 1]])
