import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradcheck import TOL, max_grad_error, weighted_sum
from rdf2rec import tensor as T


def rand(rng, *shape, lo=-1.0, hi=1.0):
    return T.parameter(rng.uniform(lo, hi, size=shape))


IDX = np.array([0, 2, 2, 1, 0, 3])

# name -> (inputs(rng), op(*tensors) -> Tensor)
PRIMITIVES = {
    "add": (lambda r: [rand(r, 3, 4), rand(r, 3, 4)], T.add),
    "add_bias": (lambda r: [rand(r, 3, 4), rand(r, 1, 4)], T.add),
    "add_scalar": (lambda r: [rand(r, 3, 4)], lambda a: T.add(a, 0.7)),
    "sub": (lambda r: [rand(r, 3, 4), rand(r, 3, 4)], T.sub),
    "neg": (lambda r: [rand(r, 3, 4)], T.neg),
    "mul": (lambda r: [rand(r, 3, 4), rand(r, 3, 4)], T.mul),
    "scale": (lambda r: [rand(r, 3, 4)], lambda a: T.scale(a, -1.5)),
    "clamp": (lambda r: [rand(r, 3, 4, lo=-2, hi=2)], lambda a: T.clamp(a, -0.9, 0.9)),
    "relu": (lambda r: [rand(r, 3, 4)], T.relu),
    "leaky_relu": (lambda r: [rand(r, 3, 4)], lambda a: T.leaky_relu(a, 0.2)),
    "elu": (lambda r: [rand(r, 3, 4)], T.elu),
    "sigmoid": (lambda r: [rand(r, 3, 4, lo=-4, hi=4)], T.sigmoid),
    "tanh": (lambda r: [rand(r, 3, 4)], T.tanh),
    "exp": (lambda r: [rand(r, 3, 4)], T.exp),
    "log": (lambda r: [rand(r, 3, 4, lo=0.5, hi=2)], T.log),
    "softplus": (lambda r: [rand(r, 3, 4, lo=-5, hi=5)], T.softplus),
    "square": (lambda r: [rand(r, 3, 4)], T.square),
    "cos": (lambda r: [rand(r, 3, 4, lo=-3, hi=3)], T.cos),
    "sin": (lambda r: [rand(r, 3, 4, lo=-3, hi=3)], T.sin),
    "matmul": (lambda r: [rand(r, 3, 4), rand(r, 4, 2)], T.matmul),
    "transpose": (lambda r: [rand(r, 3, 4)], T.transpose),
    "concat_rows": (lambda r: [rand(r, 2, 3), rand(r, 4, 3)], lambda a, b: T.concat_rows([a, b])),
    "concat_cols": (lambda r: [rand(r, 3, 2), rand(r, 3, 5)], lambda a, b: T.concat_cols([a, b])),
    "slice_rows": (lambda r: [rand(r, 5, 3)], lambda a: T.slice_rows(a, 1, 4)),
    "slice_cols": (lambda r: [rand(r, 3, 5)], lambda a: T.slice_cols(a, 2, 5)),
    "sum_all": (lambda r: [rand(r, 3, 4)], lambda a: T.sum(a)),
    "sum_axis0": (lambda r: [rand(r, 3, 4)], lambda a: T.sum(a, axis=0)),
    "sum_axis1": (lambda r: [rand(r, 3, 4)], lambda a: T.sum(a, axis=1)),
    "mean": (lambda r: [rand(r, 3, 4)], T.mean),
    "rowdot": (lambda r: [rand(r, 5, 3), rand(r, 5, 3)], T.rowdot),
    "scale_rows": (lambda r: [rand(r, 5, 3), rand(r, 5, 1)], T.scale_rows),
    "l2_norm_rows": (lambda r: [rand(r, 5, 3)], T.l2_norm_rows),
    "softmax_rows": (lambda r: [rand(r, 4, 3)], T.softmax_rows),
    "gather_rows": (lambda r: [rand(r, 4, 3)], lambda a: T.gather_rows(a, IDX)),
    "scatter_add_rows": (lambda r: [rand(r, 6, 3)], lambda a: T.scatter_add_rows(a, IDX, 5)),
    "mean_segments": (lambda r: [rand(r, 6, 3)], lambda a: T.mean_segments(a, IDX, 5)),
    "max_segments": (lambda r: [rand(r, 6, 3)], lambda a: T.max_segments(a, IDX, 5)),
    "softmax_segments": (lambda r: [rand(r, 6, 1, lo=-3, hi=3)], lambda a: T.softmax_segments(a, IDX, 5)),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_primitive_gradients(name, seed):
    rng = np.random.default_rng(seed)
    make, op = PRIMITIVES[name]
    inputs = make(rng)
    probe = np.random.default_rng(100 + seed)
    w = T.tensor(probe.normal(size=op(*inputs).shape))
    params = {f"x{i}": x for i, x in enumerate(inputs)}
    assert max_grad_error(lambda: T.sum(T.mul(op(*inputs), w)), params) <= TOL


def test_gradients_accumulate_through_reuse():
    rng = np.random.default_rng(3)
    a = rand(rng, 3, 3)
    err = max_grad_error(lambda: weighted_sum(T.mul(T.matmul(a, a), T.tanh(a)),
                                              np.random.default_rng(0)), {"a": a})
    assert err <= TOL


def test_segment_ops_on_empty_segments():
    a = T.parameter(np.ones((2, 2)))
    out = T.mean_segments(a, [0, 0], 3)
    assert out.data.tolist() == [[1, 1], [0, 0], [0, 0]]
    out = T.max_segments(a, [2, 2], 3)
    assert out.data[:2].tolist() == [[0, 0], [0, 0]]


def test_softmax_segments_normalizes():
    rng = np.random.default_rng(0)
    idx = rng.integers(0, 7, size=40)
    p = T.softmax_segments(T.tensor(rng.normal(size=(40, 1)) * 20), idx, 7).data
    sums = np.zeros((7, 1))
    np.add.at(sums, idx, p)
    present = np.bincount(idx, minlength=7) > 0
    assert np.allclose(sums[present], 1.0, atol=1e-12)
    assert np.all(p >= 0)


def test_shape_errors():
    with pytest.raises(T.ShapeError):
        T.add(T.tensor(np.ones((2, 3))), T.tensor(np.ones((3, 2))))
    with pytest.raises(T.ShapeError):
        T.matmul(T.tensor(np.ones((2, 3))), T.tensor(np.ones((2, 3))))
    with pytest.raises(T.ShapeError):
        T.gather_rows(T.tensor(np.ones((2, 3))), [5])
    with pytest.raises(T.ShapeError):
        T.backward(T.parameter(np.ones((2, 2))))


def test_interior_nodes_do_not_keep_grad():
    a = T.parameter(np.ones((1, 2)))
    mid = T.scale(a, 2.0)
    T.sum(mid).backward()
    assert mid.grad is None
    assert a.grad.tolist() == [[2.0, 2.0]]


def test_sgd_and_adam_reduce_quadratic():
    for opt_cls in (T.SGD, T.Adam):
        x = T.parameter(np.array([[3.0, -2.0]]))
        opt = opt_cls({"x": x}, lr=0.1)
        for _ in range(200):
            opt.zero_grad()
            T.sum(T.square(x)).backward()
            opt.step()
        assert np.abs(x.data).max() < 0.05


def test_optimizer_rejects_nonfinite_gradient():
    x = T.parameter(np.array([[1.0]]))
    x.grad = np.array([[np.nan]])
    with pytest.raises(T.NonFiniteError):
        T.Adam({"x": x}).step()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 10**6))
def test_matmul_chain_gradients_property(n, d, seed):
    rng = np.random.default_rng(seed)
    a, b = rand(rng, n, d), rand(rng, d, 3)
    w = T.tensor(rng.normal(size=(n, 3)))
    assert max_grad_error(lambda: T.sum(T.mul(T.tanh(T.matmul(a, b)), w)),
                          {"a": a, "b": b}) <= TOL


def test_matmul_shape():
    assert T.matmul(T.tensor(np.ones((2, 3))), T.tensor(np.ones((3, 2)))).shape == (2, 2)


def test_softmax_identical_logits_uniform():
    p = T.softmax_segments(T.tensor(np.full((4, 1), 3.3)), [0, 0, 0, 0], 1).data
    assert np.allclose(p, 0.25, atol=1e-15)


def test_scatter_add_accumulates():
    out = T.scatter_add_rows(T.tensor([[1.0, 1.0], [2.0, 2.0]]), [0, 0], 2)
    assert out.data.tolist() == [[3.0, 3.0], [0.0, 0.0]]


def test_sum_of_squares_gradient_and_accumulation():
    x = T.parameter([[1.0, -2.0, 3.0]])
    y = T.parameter([[5.0]])
    T.sum(T.square(x)).backward()
    assert x.grad.tolist() == [[2.0, -4.0, 6.0]]
    assert not y.grad.any()
    T.sum(T.square(x)).backward()
    assert x.grad.tolist() == [[4.0, -8.0, 12.0]]


def test_sgd_rule():
    p = T.parameter([[1.0]])
    p.grad = np.array([[1.0]])
    T.sgd_step({"p": p}, lr=0.1)
    assert p.data[0, 0] == pytest.approx(0.9, abs=1e-15)


def test_adam_first_step_is_lr():
    p = T.parameter(np.zeros((2, 3)))
    p.grad = np.ones((2, 3))
    T.adam_step({"p": p}, lr=1e-3)
    # bias-corrected m/sqrt(v) = 1 on the first step
    assert np.allclose(p.data, -1e-3 / (1 + 1e-8), rtol=1e-12)


def test_zero_gradient_is_fixed_point():
    for step in (lambda d: T.sgd_step(d, 0.1), lambda d: T.adam_step(d, lr=0.1)):
        p = T.parameter([[0.3, -0.7]])
        p.grad = np.zeros((1, 2))
        step({"p": p})
        assert p.data.tolist() == [[0.3, -0.7]]


def test_forward_and_backward_deterministic():
    def run():
        rng = np.random.default_rng(11)
        a, b = rand(rng, 4, 3), rand(rng, 3, 2)
        loss = T.sum(T.softplus(T.matmul(a, b)))
        loss.backward()
        return loss.item(), a.grad.copy(), b.grad.copy()
    (l1, ga1, gb1), (l2, ga2, gb2) = run(), run()
    assert l1 == l2 and np.array_equal(ga1, ga2) and np.array_equal(gb1, gb2)
