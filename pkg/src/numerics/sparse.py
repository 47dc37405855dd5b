from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import torch

from src.errors import ShapeError
from src.util import DTYPE


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """
    CSR matrix used as a constant operator (A, Â and the per-class operators).

    Row offsets are non-decreasing with the last offset equal to nnz, column
    indices are strictly increasing within each row, values are finite.
    """
    num_rows: int
    num_cols: int
    row_offsets: torch.Tensor
    col_indices: torch.Tensor
    values: torch.Tensor

    def __post_init__(self):
        offsets = self.row_offsets
        if offsets.numel() != self.num_rows + 1 or int(offsets[0]) != 0:
            raise ShapeError(f'Expected {self.num_rows + 1} row offsets starting at 0')
        if bool((offsets[1:] < offsets[:-1]).any()):
            raise ShapeError('Row offsets must be non-decreasing')
        nnz = int(offsets[-1])
        if self.col_indices.numel() != nnz or self.values.numel() != nnz:
            raise ShapeError(f'Last row offset {nnz} does not match the number of stored entries')
        if nnz:
            if int(self.col_indices.min()) < 0 or int(self.col_indices.max()) >= self.num_cols:
                raise ShapeError('Column index out of range')
            same_row = self.row_ids[1:] == self.row_ids[:-1]
            if bool((same_row & (self.col_indices[1:] <= self.col_indices[:-1])).any()):
                raise ShapeError('Column indices must be strictly increasing within a row')
            if not bool(torch.isfinite(self.values).all()):
                raise ShapeError('Sparse values must be finite')

    @property
    def shape(self) -> tuple[int, int]:
        return self.num_rows, self.num_cols

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    @cached_property
    def row_ids(self) -> torch.Tensor:
        counts = self.row_offsets[1:] - self.row_offsets[:-1]
        return torch.repeat_interleave(torch.arange(self.num_rows), counts)

    @classmethod
    def from_scipy(cls, matrix: sp.spmatrix) -> 'SparseMatrix':
        csr = sp.csr_matrix(matrix, dtype=np.float64)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(
            num_rows=csr.shape[0],
            num_cols=csr.shape[1],
            row_offsets=torch.from_numpy(csr.indptr.astype(np.int64)),
            col_indices=torch.from_numpy(csr.indices.astype(np.int64)),
            values=torch.from_numpy(csr.data.astype(np.float64)),
        )

    @classmethod
    def from_coo(cls, rows, cols, values, shape: tuple[int, int]) -> 'SparseMatrix':
        return cls.from_scipy(sp.coo_matrix((np.asarray(values), (np.asarray(rows), np.asarray(cols))), shape=shape))

    @classmethod
    def identity(cls, size: int) -> 'SparseMatrix':
        return cls.from_scipy(sp.identity(size, format='csr'))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values.numpy(), self.col_indices.numpy(), self.row_offsets.numpy()),
            shape=self.shape,
        )

    def to_dense(self) -> torch.Tensor:
        dense = torch.zeros(self.shape, dtype=DTYPE)
        dense[self.row_ids, self.col_indices] = self.values
        return dense

    def transpose(self) -> 'SparseMatrix':
        return SparseMatrix.from_scipy(self.to_scipy().transpose())


def sparse_dense_matmul(s: SparseMatrix, b: torch.Tensor) -> torch.Tensor:
    """
    Row-wise CSR product s @ b.

    Each output row is accumulated in stored column order, so the result is
    identical from run to run. The gradient to b is sᵀ·g; s is never trained.
    """
    if b.dim() != 2 or s.num_cols != b.shape[0]:
        raise ShapeError(f'Cannot multiply sparse {s.shape} by dense {tuple(b.shape)}')
    messages = s.values.unsqueeze(1) * b.index_select(0, s.col_indices)
    out = b.new_zeros((s.num_rows, b.shape[1]))
    return out.index_add(0, s.row_ids, messages)
