import numpy as np
import pytest

import camel


def test_fast_update_single_task_is_assignment():
    theta0 = {"w": np.array([[1.0, 2.0], [3.0, 4.0]])}
    theta1 = {"w": np.array([[0.5, -1.0], [7.0, 0.25]])}
    out = camel.fast_update(theta0, [theta1], 1.0)
    assert np.array_equal(out["w"], theta1["w"])


def test_fast_update_mean():
    out = camel.fast_update({"x": np.zeros(1)}, [{"x": np.full(1, 2.0)}, {"x": np.full(1, 4.0)}], 0.5)
    assert out["x"][0] == 1.5


def test_slow_update_halfway():
    slow, fast = camel.slow_update({"x": np.zeros(3)}, {"x": np.full(3, 2.0)}, 0.5)
    assert np.array_equal(slow["x"], np.ones(3))
    assert np.array_equal(fast["x"], slow["x"])


def test_blur_kernel_and_constant_image():
    k = camel.gaussian_kernel(1.0, 3)
    assert k.shape == (7, 7)
    assert abs(k.sum() - 1.0) < 1e-12
    img = np.full((8, 8, 3), 0.4)
    assert np.allclose(camel.gaussian_blur(img, 1.0, 3), img, atol=1e-12)


def test_mixup_endpoints():
    rng = np.random.default_rng(0)
    a, b = rng.random((4, 4, 3)), rng.random((4, 4, 3))
    assert np.array_equal(camel.mixup_images(a, b, 1.0), a)
    assert np.array_equal(camel.mixup_images(a, b, 0.0), b)
    lam = np.array(camel.sample_lambda(1.0, 3, 2000))
    assert lam.min() >= 0.0 and lam.max() <= 1.0
    assert abs(lam.mean() - 0.5) < 0.03


def test_metrics():
    scores = np.array([[0.9, 0.8, 0.1]])
    assert camel.recall_at_k(scores, [4], [1, 4, 2], 1) == 0.0
    assert camel.mean_ap(scores, [4], [1, 4, 2]) == 0.5
    m = camel.retrieval_metrics(np.eye(3), [0, 1, 2], [0, 1, 2])
    assert m["r1"] == 1.0 and m["map"] == 1.0


def test_bad_config_raises():
    with pytest.raises(ValueError):
        camel.run("[data]\nidentities = 1\n", 0)


def test_tiny_run_is_deterministic():
    cfg = (
        "[data]\nidentities = 8\nimages_per_identity = 2\n"
        "[model]\nembed_dim = 8\nhidden_dim = 12\n"
        "[train]\nphase_a_epochs = 2\nphase_b_epochs = 1\nbatch_size = 4\n"
        "[eval]\nmax_mask = 2\nper_epoch = off\n"
    )
    a = camel.run(cfg, 5)
    b = camel.run(cfg, 5)
    assert len(a["curve"]) == 3
    assert a["curve"] == b["curve"]
    assert len(a["losses"]) == 3
    for name, value in a["params"].items():
        assert np.array_equal(value, b["params"][name])
