import numpy as np
import pytest

from conftest import random_leaf_context
from partition_tree import kernels


def make_scan_inputs(rng, is_x):
    vals, weights, joint = random_leaf_context(rng, max_n=150)
    order = np.argsort(vals, kind="stable")
    sx = np.ascontiguousarray(vals[order])
    wx = np.ascontiguousarray(np.cumsum(weights[order]))
    jvals = vals[joint]
    jw = weights[joint]
    jorder = np.argsort(jvals, kind="stable")
    sxy = np.ascontiguousarray(jvals[jorder])
    wxy = np.ascontiguousarray(np.cumsum(jw[jorder]))
    mu_parent = float(rng.uniform(0.5, 3.0))
    n_total = float(weights.sum())
    if is_x:
        args = (sx, wx, sxy, wxy, True, mu_parent, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, n_total, 0.0)
    else:
        lo = float(sxy[0]) - 0.5 if len(sxy) else 0.0
        hi = float(sxy[-1]) + 0.5 if len(sxy) else 1.0
        args = (
            np.zeros(1),
            np.asarray([wx[-1]]),
            sxy,
            wxy,
            False,
            mu_parent,
            mu_parent / (hi - lo),
            lo,
            hi,
            1.0,
            1.0,
            0.0,
            n_total,
            0.0,
        )
    return args


class TestBackends:
    def test_active_backend_known(self):
        assert kernels.active_backend() in ("python", "compiled")

    def test_python_backend_always_available(self):
        assert "python" in kernels.available_backends()

    @pytest.mark.skipif(
        "compiled" not in kernels.available_backends(),
        reason="compiled extension not built",
    )
    def test_backends_agree_bitwise(self):
        impls = kernels.available_backends()
        rng = np.random.default_rng(11)
        for trial in range(200):
            args = make_scan_inputs(rng, is_x=trial % 2 == 0)
            results = {name: impl(*args) for name, impl in impls.items()}
            py = results["python"]
            cy = results["compiled"]
            assert py[0] == cy[0]
            if py[0]:
                # same float bit patterns for gain and threshold
                assert py[1] == cy[1]
                assert py[2] == cy[2]
                assert py[3] == cy[3]
                assert py[4] == cy[4]
