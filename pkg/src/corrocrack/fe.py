"""Linear-triangle finite-element kernels shared by transport and mechanics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


@dataclass(frozen=True)
class P1Geometry:
    """Per-element area and constant shape-function gradients.

    ``grad[e, i] = (dN_i/dx, dN_i/dy)`` for local node ``i`` of element ``e``.
    """

    area: np.ndarray   # (M,)
    grad: np.ndarray   # (M, 3, 2)

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "P1Geometry":
        xy = mesh.nodes[mesh.elements]           # (M, 3, 2)
        x, y = xy[..., 0], xy[..., 1]
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        two_a = b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0]
        grad = np.stack([b, c], axis=2) / two_a[:, None, None]
        return cls(0.5 * two_a, grad)

    def lumped_mass(self, elements: np.ndarray, n_nodes: int, weight=None) -> np.ndarray:
        """Nodal weights ``sum_e w_e A_e / 3``."""
        w = self.area / 3.0 if weight is None else self.area * weight / 3.0
        return np.bincount(elements.ravel(), weights=np.repeat(w, 3), minlength=n_nodes)

    def laplacian_blocks(self) -> np.ndarray:
        """Element matrices ``A_e grad N_i . grad N_j`` with shape (M, 3, 3)."""
        return self.area[:, None, None] * np.einsum("eik,ejk->eij", self.grad, self.grad)

    def strain_operator(self) -> np.ndarray:
        """Voigt strain-displacement matrices (M, 3, 6), engineering shear."""
        M = self.area.size
        B = np.zeros((M, 3, 6))
        B[:, 0, 0::2] = self.grad[:, :, 0]
        B[:, 1, 1::2] = self.grad[:, :, 1]
        B[:, 2, 0::2] = self.grad[:, :, 1]
        B[:, 2, 1::2] = self.grad[:, :, 0]
        return B


class Assembler:
    """Fast repeated assembly of element blocks into a fixed CSR pattern.

    The sparsity pattern and the scatter map from element entries to CSR
    slots are computed once; every later assembly is a single ``bincount``.
    """

    def __init__(self, elements: np.ndarray, n_nodes: int, ndof: int = 1):
        dofs = elements if ndof == 1 else (ndof * elements[:, :, None] + np.arange(ndof)).reshape(len(elements), -1)
        k = dofs.shape[1]
        self.n = n_nodes * ndof
        self.dofs = dofs
        rows = np.repeat(dofs, k, axis=1).ravel()
        cols = np.tile(dofs, (1, k)).ravel()
        key = rows.astype(np.int64) * self.n + cols
        uniq, self._inv = np.unique(key, return_inverse=True)
        self._indices = (uniq % self.n).astype(np.int32)
        counts = np.bincount(uniq // self.n, minlength=self.n)
        self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        self.nnz = uniq.size

    def matrix(self, blocks: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self._inv, weights=blocks.ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self._indices.copy(), self._indptr.copy()), shape=(self.n, self.n))

    def vector(self, local: np.ndarray) -> np.ndarray:
        return np.bincount(self.dofs.ravel(), weights=local.ravel(), minlength=self.n)


def edge_nodal_loads(edges: np.ndarray, values: np.ndarray, n_nodes: int) -> np.ndarray:
    """Lump per-edge integrals half-and-half onto the two endpoint nodes."""
    half = np.repeat(0.5 * values, 2)
    return np.bincount(edges.ravel(), weights=half, minlength=n_nodes)
