"""Backend parity: the compiled kernels must match the pure-Python twins
bit for bit, so either backend yields identical simulations."""

import math
import random

import pytest

from sliceguard import _kernels_py, kernels


def _random_nvs_case(rng):
    n = rng.randint(1, 6)
    kinds = [rng.randint(0, 1) for _ in range(n)]
    reserves = [rng.uniform(0.05, 50.0) for _ in range(n)]
    refs = [r * rng.uniform(1.0, 3.0) if k == 0 else 1.0 for k, r in zip(kinds, reserves)]
    emas = [rng.uniform(0.0, 60.0) if k == 0 else rng.uniform(0.0, 1.0) for k in kinds]
    max_prbs = [rng.randint(0, 200) for _ in range(n)]
    return dict(
        kinds=kinds,
        reserves=reserves,
        refs=refs,
        emas=emas,
        max_prbs=max_prbs,
        budget=rng.randint(0, 150),
        grid_size=106,
        alpha=0.01,
        rate_scale=1.132,
        quantum=rng.choice([1, 2, 4]),
        eps=1e-6,
    )


def test_nvs_grants_matches_python_backend():
    rng = random.Random(42)
    for _ in range(300):
        case = _random_nvs_case(rng)
        assert kernels.nvs_grants(**case) == _kernels_py.nvs_grants(**case)


def test_nvs_grants_respects_budget_and_demand():
    rng = random.Random(7)
    for _ in range(100):
        case = _random_nvs_case(rng)
        granted = kernels.nvs_grants(**case)
        assert sum(granted) <= case["budget"]
        for g, m in zip(granted, case["max_prbs"]):
            assert 0 <= g <= m


def test_nvs_tie_break_prefers_lowest_index():
    granted = kernels.nvs_grants([1, 1], [0.5, 0.5], [1.0, 1.0], [0.5, 0.5], [10, 10], 1, 106, 0.01, 1.132, 1, 1e-6)
    assert granted == [1, 0]


def _random_ensemble(rng, n_features=5):
    feats, thrs, lefts, rights, vals, roots = [], [], [], [], [], []
    for _ in range(rng.randint(1, 8)):
        base = len(feats)
        roots.append(base)
        # depth-2 random trees: root, two children (leaves or one more split)
        nodes = [(rng.randrange(n_features), rng.uniform(-2, 2))]
        feats.append(nodes[0][0])
        thrs.append(nodes[0][1])
        lefts.append(base + 1)
        rights.append(base + 2)
        vals.append(0.0)
        for _ in range(2):
            feats.append(-1)
            thrs.append(0.0)
            lefts.append(0)
            rights.append(0)
            vals.append(rng.uniform(-1, 1))
    return feats, thrs, lefts, rights, vals, roots


def test_margin_matches_python_backend():
    rng = random.Random(99)
    for _ in range(50):
        arrays = _random_ensemble(rng)
        bias = rng.uniform(-1, 1)
        fn_c = kernels.make_margin_fn(*arrays, bias)
        fn_p = _kernels_py.make_margin_fn(*arrays, bias)
        for _ in range(20):
            x = [rng.uniform(-3, 3) for _ in range(5)]
            assert fn_c(x) == fn_p(x)


def test_margin_batch_matches_single():
    rng = random.Random(5)
    arrays = _random_ensemble(rng)
    fn = kernels.make_margin_fn(*arrays, 0.25)
    batch = kernels.make_margin_batch_fn(*arrays, 0.25)
    rows = [[rng.uniform(-3, 3) for _ in range(5)] for _ in range(11)]
    assert list(batch(rows)) == [fn(r) for r in rows]


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
def test_compiled_backend_active():
    assert kernels.BACKEND == "cython"
    assert not math.isnan(kernels.make_margin_fn([-1], [0.0], [0], [0], [0.5], [0], 0.0)([]))
