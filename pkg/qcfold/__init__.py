"""Folding maps on planar triangle meshes via alternating Beltrami equations."""
from qcfold.coeff import INF, BeltramiField
from qcfold.foldconfig import FoldColoring
from qcfold.mesh import PinSet, TriMesh, load_mesh, save_mesh

__version__ = "0.1.0"

__all__ = ["INF", "BeltramiField", "FoldColoring", "PinSet", "TriMesh", "load_mesh", "save_mesh"]
