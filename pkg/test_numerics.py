import math

import numpy as np
import pytest
import scipy.sparse as sp
import torch

from src.errors import EmptyMaskError, ShapeError
from src.numerics.ops import dense_matmul, dropout_mask, masked_cross_entropy, maxpool_stack, relu, row_softmax
from src.numerics.optim import ParameterStore, adam_step
from src.numerics.sparse import SparseMatrix, sparse_dense_matmul


def t(values):
    return torch.tensor(values, dtype=torch.float64)


def test_dense_matmul():
    assert torch.equal(dense_matmul(torch.eye(2, dtype=torch.float64), t([[1.0], [2.0]])), t([[1.0], [2.0]]))
    assert torch.equal(dense_matmul(t([[1, 2], [3, 4]]), t([[1], [1]])), t([[3], [7]]))
    with pytest.raises(ShapeError):
        dense_matmul(torch.zeros(2, 3, dtype=torch.float64), torch.zeros(2, 2, dtype=torch.float64))


def test_sparse_identity_product():
    b = t([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    assert torch.equal(sparse_dense_matmul(SparseMatrix.identity(3), b), b)


def test_sparse_single_row():
    s = SparseMatrix.from_coo([0, 0], [0, 1], [0.5, 0.5], shape=(1, 2))
    assert torch.equal(sparse_dense_matmul(s, t([[2.0], [4.0]])), t([[3.0]]))


def test_sparse_empty_row_gives_zero_row():
    s = SparseMatrix.from_coo([0], [1], [2.0], shape=(2, 2))
    out = sparse_dense_matmul(s, t([[1.0], [1.0]]))
    assert torch.equal(out, t([[2.0], [0.0]]))


def test_sparse_matches_scipy():
    matrix = sp.random(7, 5, density=0.4, random_state=0, format='csr')
    b = torch.from_numpy(np.random.default_rng(0).standard_normal((5, 3)))
    out = sparse_dense_matmul(SparseMatrix.from_scipy(matrix), b)
    assert torch.allclose(out, torch.from_numpy(matrix @ b.numpy()))


def test_sparse_gradient_is_transpose_product():
    s = SparseMatrix.from_coo([0, 1, 1], [1, 0, 2], [2.0, 3.0, -1.0], shape=(2, 3))
    b = torch.ones(3, 2, dtype=torch.float64, requires_grad=True)
    upstream = t([[1.0, 2.0], [3.0, 4.0]])
    (sparse_dense_matmul(s, b) * upstream).sum().backward()
    assert torch.allclose(b.grad, s.to_dense().T @ upstream)


def test_sparse_rejects_unsorted_columns():
    with pytest.raises(ShapeError):
        SparseMatrix(1, 3, torch.tensor([0, 2]), torch.tensor([2, 1]), t([1.0, 1.0]))


def test_sparse_rejects_bad_offsets():
    with pytest.raises(ShapeError):
        SparseMatrix(2, 2, torch.tensor([0, 2, 1]), torch.tensor([0]), t([1.0]))


def test_sparse_shape_mismatch():
    with pytest.raises(ShapeError):
        sparse_dense_matmul(SparseMatrix.identity(3), torch.zeros(2, 1, dtype=torch.float64))


def test_relu():
    assert torch.equal(relu(-torch.ones(2, 2, dtype=torch.float64)), torch.zeros(2, 2, dtype=torch.float64))
    x = t([[-1.0, 2.0]]).requires_grad_()
    out = relu(x)
    assert torch.equal(out, t([[0.0, 2.0]]))
    (out * t([[5.0, 5.0]])).sum().backward()
    assert torch.equal(x.grad, t([[0.0, 5.0]]))


def test_row_softmax():
    assert torch.allclose(row_softmax(t([[0.0, 0.0]])), t([[0.5, 0.5]]))
    assert torch.allclose(row_softmax(t([[math.log(3), 0.0]])), t([[0.75, 0.25]]))
    large = row_softmax(t([[1000.0, 0.0]]))
    assert bool(torch.isfinite(large).all())
    assert large[0, 0].item() == pytest.approx(1.0)


def test_cross_entropy():
    labels = torch.tensor([0, 1])
    mask = torch.tensor([True, True])
    assert masked_cross_entropy(t([[1.0, 0.0], [0.0, 1.0]]), labels, mask).item() == pytest.approx(0.0)
    assert masked_cross_entropy(t([[0.5, 0.5], [0.5, 0.5]]), labels, mask).item() == pytest.approx(math.log(2))


def test_cross_entropy_only_reads_masked_nodes():
    probs = t([[0.5, 0.5], [1.0, 0.0]])
    loss = masked_cross_entropy(probs, torch.tensor([0, 1]), torch.tensor([True, False]))
    assert loss.item() == pytest.approx(math.log(2))


def test_cross_entropy_clamps_zero_probability():
    loss = masked_cross_entropy(t([[1.0, 0.0]]), torch.tensor([1]), torch.tensor([True]))
    assert loss.item() == pytest.approx(-math.log(1e-12))


def test_cross_entropy_empty_mask():
    with pytest.raises(EmptyMaskError):
        masked_cross_entropy(t([[0.5, 0.5]]), torch.tensor([0]), torch.tensor([False]))


def test_maxpool_single_input_is_identity():
    h = t([[1.0, -2.0]])
    pooled, source = maxpool_stack([h])
    assert torch.equal(pooled, h)
    assert source.tolist() == [[0, 0]]


def test_maxpool_routes_gradient_to_source():
    h0 = t([[1.0, 5.0]]).requires_grad_()
    h1 = t([[3.0, 2.0]]).requires_grad_()
    pooled, source = maxpool_stack([h0, h1])
    assert torch.equal(pooled, t([[3.0, 5.0]]))
    assert source.tolist() == [[1, 0]]
    pooled.sum().backward()
    assert torch.equal(h0.grad, t([[0.0, 1.0]]))
    assert torch.equal(h1.grad, t([[1.0, 0.0]]))


def test_maxpool_ties_go_to_lowest_index():
    _, source = maxpool_stack([t([[2.0]]), t([[2.0]])])
    assert source.tolist() == [[0]]


def test_maxpool_shape_mismatch():
    with pytest.raises(ShapeError):
        maxpool_stack([t([[1.0]]), t([[1.0, 2.0]])])


def test_dropout_mask():
    assert torch.equal(dropout_mask((3, 4), 0.0), torch.ones(3, 4, dtype=torch.float64))
    assert torch.equal(dropout_mask((3, 4), 0.7, training=False), torch.ones(3, 4, dtype=torch.float64))
    mask = dropout_mask((200, 200), 0.5, generator=torch.Generator().manual_seed(0))
    kept = float((mask > 0).double().mean())
    assert kept == pytest.approx(0.5, abs=0.05)
    assert set(mask.unique().tolist()) <= {0.0, 2.0}
    with pytest.raises(ValueError):
        dropout_mask((2, 2), 1.0)


def _store(value, grad, **kwargs):
    param = torch.nn.Parameter(t(value))
    param.grad = t(grad)
    return param, ParameterStore({'w': param}, **kwargs)


def test_adam_zero_gradient_leaves_parameters():
    param, store = _store([[1.0, -2.0]], [[0.0, 0.0]])
    adam_step(store, lr=0.1)
    assert torch.equal(param.detach(), t([[1.0, -2.0]]))


def test_adam_first_step_moves_by_lr():
    param, store = _store([[1.0, -2.0, 0.5]], [[3.0, -0.2, 1e-3]])
    adam_step(store, lr=0.01)
    delta = param.detach() - t([[1.0, -2.0, 0.5]])
    assert torch.allclose(delta, t([[-0.01, 0.01, -0.01]]), atol=1e-6)
    assert store.step_count('w') == 1
    first, second = store.moments('w')
    assert torch.allclose(first, 0.1 * t([[3.0, -0.2, 1e-3]]))
    assert torch.allclose(second, 0.001 * t([[9.0, 0.04, 1e-6]]))


def test_adam_zero_lr_leaves_parameters():
    param, store = _store([[1.0]], [[4.0]])
    adam_step(store, lr=0.0)
    assert torch.equal(param.detach(), t([[1.0]]))


def test_step_zeroes_gradients():
    _, store = _store([[1.0]], [[4.0]])
    store.step()
    assert torch.equal(store.gradient('w'), t([[0.0]]))


def test_sgd_store():
    param, store = _store([[1.0]], [[4.0]], optimizer='sgd', lr=0.5)
    store.step()
    assert torch.equal(param.detach(), t([[-1.0]]))
    with pytest.raises(ValueError):
        adam_step(store, lr=0.1)


def test_weight_decay_applies_per_parameter():
    a = torch.nn.Parameter(t([[1.0]]))
    b = torch.nn.Parameter(t([[1.0]]))
    a.grad, b.grad = t([[0.0]]), t([[0.0]])
    store = ParameterStore({'a': a, 'b': b}, optimizer='sgd', lr=0.1, weight_decay={'a': 0.5})
    store.step()
    assert a.item() == pytest.approx(0.95)
    assert b.item() == 1.0
    with pytest.raises(KeyError):
        ParameterStore({'a': a}, weight_decay={'missing': 1.0})


def test_row_softmax_rows_sum_to_one_and_ignore_shifts():
    x = torch.randn(7, 5, generator=torch.Generator().manual_seed(0), dtype=torch.float64)
    probs = row_softmax(x)
    assert torch.allclose(probs.sum(dim=1), torch.ones(7, dtype=torch.float64), atol=1e-12, rtol=0)
    shifted = row_softmax(x + torch.arange(7, dtype=torch.float64).unsqueeze(1))
    assert torch.allclose(shifted, probs, atol=1e-12, rtol=0)


def test_cross_entropy_ignores_node_order():
    rng = np.random.default_rng(0)
    probs = torch.softmax(torch.from_numpy(rng.standard_normal((12, 4))), dim=1)
    labels = torch.from_numpy(rng.integers(0, 4, size=12))
    mask = torch.from_numpy(rng.random(12) < 0.5)
    mask[0] = True
    perm = torch.from_numpy(rng.permutation(12))
    loss = masked_cross_entropy(probs, labels, mask)
    assert float(masked_cross_entropy(probs[perm], labels[perm], mask[perm])) == pytest.approx(float(loss), abs=1e-12)


def test_sparse_product_matches_densified_product():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n, k, m = (int(v) for v in rng.integers(1, 10, size=3))
        matrix = sp.random(n, k, density=float(rng.uniform(0.0, 1.0)), format='csr', random_state=rng)
        dense = torch.from_numpy(rng.standard_normal((k, m)))
        expected = torch.from_numpy(matrix.toarray()) @ dense
        result = sparse_dense_matmul(SparseMatrix.from_scipy(matrix), dense)
        assert torch.allclose(result, expected, atol=1e-12, rtol=0)
