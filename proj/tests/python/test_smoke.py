import numpy as np
import pytest

import capvst


def smooth(h, w, phase=0.0):
    y, x = np.mgrid[0:h, 0:w].astype(np.float32)
    img = np.stack([
        0.5 + 0.3 * np.sin(x / 5.0 + phase),
        0.5 + 0.3 * np.cos(y / 7.0 - phase),
        0.5 + 0.2 * np.sin((x + y) / 9.0),
    ])
    return img.astype(np.float32)


@pytest.fixture(scope="module")
def engine():
    return capvst.Engine(seed=3)


def test_default_plan_parameter_count(engine):
    assert engine.parameter_count == 3_738_656


def test_encode_decode_round_trip(engine):
    x = np.random.default_rng(0).random((3, 32, 32), dtype=np.float32)
    z = engine.encode(x)
    assert z.shape == (64, 16, 16)
    assert np.abs(engine.decode(z) - x).max() <= 1e-3


def test_style_equals_content(engine):
    c = smooth(32, 32)
    out = np.clip(engine.stylize(c, c), 0.0, 1.0)
    assert np.abs(out - c).max() <= 1e-2
    assert engine.style_stat_count >= 1


def test_transfer_matches_style_covariance():
    rng = np.random.default_rng(1)
    mix = np.eye(8) + 0.3 * rng.standard_normal((8, 8))
    f_c = (mix @ rng.standard_normal((8, 400))).reshape(8, 20, 20).astype(np.float32)
    f_s = (mix.T @ rng.standard_normal((8, 400)) + 1.0).reshape(8, 20, 20).astype(np.float32)
    f_cs = capvst.transfer(f_c, f_s)
    ref = np.cov(f_s.reshape(8, -1).astype(np.float64), bias=True)
    got = np.cov(f_cs.reshape(8, -1).astype(np.float64), bias=True)
    assert np.linalg.norm(got - ref) / np.linalg.norm(ref) <= 1e-3
    assert np.allclose(capvst.covariance(f_s), ref, atol=1e-9)


def test_cholesky_against_numpy():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((5, 5))
    s = a @ a.T + 5 * np.eye(5)
    lower, eps = capvst.cholesky(s)
    assert eps == 0.0
    assert np.allclose(lower, np.linalg.cholesky(s), atol=1e-12)
    g = capvst.cholesky_backward(s, lower, np.tril(np.ones((5, 5))))
    assert np.allclose(g, g.T)


def test_matting_laplacian_rows_sum_to_zero():
    img = np.random.default_rng(3).random((3, 6, 7), dtype=np.float32)
    rows, cols, values, n = capvst.matting_laplacian(img)
    dense = np.zeros((n, n))
    dense[rows, cols] = values
    assert np.abs(dense.sum(axis=1)).max() <= 1e-8
    assert np.array_equal(dense, dense.T)


def test_metrics():
    a = smooth(24, 24)
    assert capvst.ssim(a, a) == pytest.approx(1.0)
    assert capvst.cycle_loss(a + 0.5, a) == pytest.approx(0.5, rel=1e-6)
    shifted = np.concatenate([a[:, :, :1], a[:, :, :-1]], axis=2)
    u = np.ones((24, 24), np.float32)
    v = np.zeros((24, 24), np.float32)
    mean, valid, heat = capvst.temporal_error(a, shifted, u, v)
    assert mean <= 1e-6
    assert valid == 24 * 23
    assert heat.shape == (1, 24, 24)


def test_errors_are_typed(engine):
    with pytest.raises(capvst.Error):
        engine.encode(np.zeros((3, 20, 20), np.float32))
    with pytest.raises(capvst.ShapeError):
        capvst.ssim(np.zeros((3, 8, 8), np.float32), np.zeros((3, 8, 9), np.float32))


def test_image_io(tmp_path):
    img = np.round(np.random.default_rng(4).random((3, 5, 6)) * 255).astype(np.float32) / 255
    path = str(tmp_path / "x.ppm")
    capvst.write_image(path, img)
    assert np.abs(capvst.read_image(path) - img).max() <= 1e-6


def test_selftest_report():
    report = capvst.selftest(seed=1)
    assert report["passed"]
    assert report["parameter_count"] == 3_738_656
