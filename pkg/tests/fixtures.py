"""Small meshes (at most 10 triangles) shared by oracle and unit tests."""
import numpy as np

from nlsrelax.mesh import (DIRICHLET, NEUMANN, Mesh, delaunay_triangulate, dirichlet_on_vertical_lines,
                           generate_structured, tag_boundary)


def reference_triangle():
    return Mesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)])


def unit_square():
    return generate_structured(1, 1)


def _perturbed_grid():
    base = generate_structured(2, 2, (-1.0, 2.0, 0.0, 1.0))
    pts = base.points.copy()
    pts[4] += (0.21, -0.13)  # the single interior vertex
    return Mesh(pts, base.triangles)


def _pentagon_fan():
    outer = [(0.0, -1.0), (1.1, -0.2), (0.7, 1.0), (-0.6, 0.9), (-1.0, -0.3)]
    pts = [(0.1, 0.05)] + outer
    tris = [(0, 1 + i, 1 + (i + 1) % 5) for i in range(5)]
    return Mesh(pts, tris)


def fixture_meshes():
    """name -> tagged mesh; mixes Dirichlet, Neumann and mixed boundaries."""
    hexagon = [(np.cos(a) * 1.3, np.sin(a)) for a in np.linspace(0, 2 * np.pi, 7)[:-1] + 0.3]
    out = {
        "reference-triangle": reference_triangle(),
        "unit-square-neumann": unit_square(),
        "unit-square-left-dirichlet": tag_boundary(unit_square(), lambda x, y: abs(x) < 1e-12),
        "perturbed-grid-bottom-dirichlet": tag_boundary(_perturbed_grid(), lambda x, y: abs(y) < 1e-12),
        "pentagon-fan-mixed": tag_boundary(_pentagon_fan(), lambda x, y: DIRICHLET if x > 0 else NEUMANN),
        "hexagon-delaunay": delaunay_triangulate(hexagon, 2.0),
        "strip-ends-dirichlet": tag_boundary(generate_structured(5, 1, (-10.0, 10.0, -1.0, 1.0)),
                                             dirichlet_on_vertical_lines(-10.0, 10.0)),
    }
    for name, mesh in out.items():
        assert len(mesh.triangles) <= 10, name
    return out
