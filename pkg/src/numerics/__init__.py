from src.numerics.gradcheck import GradCheckReport, grad_check
from src.numerics.ops import (
    dense_matmul,
    dropout_mask,
    masked_cross_entropy,
    maxpool_stack,
    relu,
    row_softmax,
)
from src.numerics.optim import ParameterStore, adam_step
from src.numerics.sparse import SparseMatrix, sparse_dense_matmul
