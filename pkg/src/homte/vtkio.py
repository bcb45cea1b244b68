"""Legacy ASCII VTK export of meshes and nodal fields."""

import os


def write_vtk(path, mesh, point_data=None, cell_data=None, title="homte fields"):
    """Write an unstructured-grid file: triangles (cell type 5), z = 0.

    ``point_data``/``cell_data`` map scalar names to arrays.  The file is
    written to a temporary sibling and renamed into place.
    """
    point_data = point_data or {}
    cell_data = cell_data or {}
    tmp = f"{os.fspath(path)}.tmp-{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_nodes} double\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        fh.write(f"CELLS {mesh.n_elements} {4 * mesh.n_elements}\n")
        for a, b, c in mesh.elements:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {mesh.n_elements}\n")
        fh.write("5\n" * mesh.n_elements)
        if cell_data:
            fh.write(f"CELL_DATA {mesh.n_elements}\n")
            for name, values in cell_data.items():
                fh.write(f"SCALARS {name} double 1\n")
                fh.write("LOOKUP_TABLE default\n")
                for v in values:
                    fh.write(f"{v:.17g}\n")
        if point_data:
            fh.write(f"POINT_DATA {mesh.n_nodes}\n")
            for name, values in point_data.items():
                fh.write(f"SCALARS {name} double 1\n")
                fh.write("LOOKUP_TABLE default\n")
                for v in values:
                    fh.write(f"{v:.17g}\n")
    os.replace(tmp, path)
