"""Jacobi operator on the branched double cover: meshes, assembly, counts."""

from .mesh import CoverMesh, build_cover_mesh, octahedral_sphere
from .assembly import JacobiSystem, assemble_jacobi
from .analysis import SpectrumReport, killing_kernel_residual, morse_index_nullity, scan_index_jumps

__all__ = ["CoverMesh", "build_cover_mesh", "octahedral_sphere", "JacobiSystem", "assemble_jacobi",
           "SpectrumReport", "killing_kernel_residual", "morse_index_nullity", "scan_index_jumps"]
