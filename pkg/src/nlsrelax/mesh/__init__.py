from .core import (
    DIRICHLET,
    NEUMANN,
    InvalidGeometryError,
    Mesh,
    MeshError,
    QualityReport,
    all_dirichlet,
    all_neumann,
    dirichlet_on_vertical_lines,
    generate_structured,
    quality_report,
    refine_uniform,
    structured_for_count,
    tag_boundary,
)
from .delaunay import delaunay_triangulate, delaunay_violations, is_delaunay, target_h_for_count
from .io import MshParseError, dump_text, export_msh, import_msh, load_text, read_mesh, write_mesh

__all__ = [
    "DIRICHLET", "NEUMANN", "InvalidGeometryError", "Mesh", "MeshError", "MshParseError",
    "QualityReport", "all_dirichlet", "all_neumann", "delaunay_triangulate",
    "delaunay_violations", "dirichlet_on_vertical_lines", "dump_text", "export_msh",
    "generate_structured", "import_msh", "is_delaunay", "load_text", "quality_report",
    "read_mesh", "refine_uniform", "structured_for_count", "tag_boundary",
    "target_h_for_count", "write_mesh",
]
