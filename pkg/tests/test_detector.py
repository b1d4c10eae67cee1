import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spdlab.detector import (
    CalibrationEntry,
    CalibrationTable,
    DetectionDataset,
    DetectorConfig,
    DetectorModel,
    calibrated_degree,
    calibrated_value,
    detect,
    fit_line,
    generate_dataset,
    nearest_entry,
    pad_window,
    spearman,
    train_detector,
    window_at,
)
from spdlab.numerics import DimensionError, DomainError, ParameterSet, gradient_check


@given(st.integers(1, 12), st.integers(1, 10), st.data())
def test_window_at_is_trailing_and_left_padded(length, n, data):
    obs = np.arange(length)[:, None] * np.ones((1, 3))
    t = data.draw(st.integers(0, length - 1))
    win, padded = window_at(obs, t, n)
    assert win.shape == (n, 3)
    expect = [max(0, t - n + 1 + k) for k in range(n)]
    assert list(win[:, 0]) == expect
    assert padded == (t - n + 1 < 0)


def test_pad_window_rejects_empty():
    with pytest.raises(DomainError):
        pad_window([], 3)


def test_dataset_is_balanced_and_roundtrips(tmp_path, applepear, scripted_pairs):
    coop, defect = scripted_pairs
    ds = generate_dataset(applepear, (coop[1], defect[1]), (coop[0], defect[0]), 4, 30, seed=1)
    assert ds.class_counts == {1: 30, 0: 30}
    assert ds.windows.shape == (60, 4, applepear.obs_size)
    ds.save(tmp_path / "d.npz")
    back = DetectionDataset.load(tmp_path / "d.npz")
    assert np.array_equal(back.windows, ds.windows) and np.array_equal(back.labels, ds.labels)
    again = generate_dataset(applepear, (coop[1], defect[1]), (coop[0], defect[0]), 4, 30, seed=1)
    assert np.array_equal(again.windows, ds.windows)


def test_dataset_errors(applepear, scripted_pairs):
    coop, defect = scripted_pairs
    with pytest.raises(DomainError):
        generate_dataset(applepear, (coop[1], defect[1]), (coop[0], defect[0]), 500, 5)
    with pytest.raises(ValueError):
        generate_dataset(applepear, (coop[1], defect[1]), (coop[0], defect[0]), 4, 5, offsets="middle")


def _small_model(seed, recon=0.5):
    return DetectorModel(6, DetectorConfig(n=3, encoder=(5,), recurrent=4, recon_weight=recon), seed)


def _gradcheck(model, seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, size=(4, 3, 6)).astype(float)
    y = np.array([1, 0, 1, 0])
    # keep relu inputs away from the kink so central differences are valid
    for name, arr in model.params.items():
        if name.endswith(".b") and name.startswith("enc"):
            arr[...] = 0.3
    return gradient_check(model.params, lambda p: model.loss(x, y, p),
                          lambda p: model.loss_and_grad(x, y, p)[1])


def test_detector_loss_gradient_check():
    for seed in range(20):
        rep = _gradcheck(_small_model(seed), seed)
        assert rep.passed, (seed, rep.per_param)


def test_classifier_only_ablation_trains():
    rep = _gradcheck(_small_model(0, recon=0.0), 0)
    assert rep.passed
    assert not np.any(_small_model(0, 0.0).loss_and_grad(np.zeros((1, 3, 6)), np.array([1]))[1]["dec.out.W"])


def test_detect_is_pure_and_checks_length():
    m = _small_model(1)
    w = np.random.default_rng(0).integers(0, 2, size=(3, 6))
    assert detect(m, w) == detect(m, w)
    assert 0 < detect(m, w) < 1
    with pytest.raises(DimensionError):
        detect(m, np.zeros((4, 6)))


def test_model_roundtrip(tmp_path):
    m = _small_model(2)
    m.save(tmp_path / "m.model")
    back = DetectorModel.load(tmp_path / "m.model")
    x = np.random.default_rng(1).integers(0, 2, size=(5, 3, 6))
    assert np.array_equal(back.scores(x), m.scores(x))


def test_tiny_training_run_separates_trivial_classes():
    rng = np.random.default_rng(0)
    windows = np.zeros((200, 3, 6), dtype=np.uint8)
    labels = np.repeat([1, 0], 100).astype(np.int8)
    windows[:100, :, 0] = 1
    windows[100:, :, 1] = 1
    windows[:, :, 2:] = rng.integers(0, 2, size=(200, 3, 4))
    ds = DetectionDataset("toy", 3, windows, labels)
    model, rep = train_detector(ds, DetectorConfig(n=3, encoder=(8,), recurrent=4, epochs=30, batch=32), seed=0)
    assert rep.heldout_accuracy == 1.0 and rep.heldout_size == 40
    assert len(rep.epoch_losses) == 30


def test_fit_line_recovers_affine_map():
    s = np.linspace(0.2, 0.8, 11)
    e = fit_line(s, 2.0 * s - 0.4, own_degree=0.5)
    assert abs(e.slope - 2.0) < 1e-9 and abs(e.intercept + 0.4) < 1e-9 and e.residual_rms < 1e-9
    flat = fit_line(np.full(11, 0.5), np.linspace(0, 1, 11))
    assert flat.degenerate and flat.slope == 0.0


def test_calibration_lookup_and_roundtrip(tmp_path):
    t = CalibrationTable([CalibrationEntry(0.0, 1.0, 0.0, 0.0), CalibrationEntry(1.0, 2.0, -1.0, 0.0)])
    assert nearest_entry(t, 0.5).own_degree == 0.0  # ties go low
    assert nearest_entry(t, 0.7).own_degree == 1.0
    assert calibrated_value(t, 1.0, 0.25) == -0.5
    assert calibrated_degree(t, 1.0, 0.25) == 0.0
    t.save(tmp_path / "c.txt")
    assert CalibrationTable.load(tmp_path / "c.txt").entries == t.entries


def test_spearman():
    assert spearman([1, 2, 3], [10, 20, 30]) == 1.0
    assert spearman([1, 1, 1], [1, 2, 3]) == 0.0


@pytest.mark.parametrize("recon", [0.0, 0.5])
def test_forward_only_loss_matches_training_loss(recon):
    m = _small_model(3, recon)
    x = np.random.default_rng(2).normal(size=(5, 3, 6))
    y = np.array([1, 0, 0, 1, 1])
    assert m.loss(x, y) == m.loss_and_grad(x, y)[0]
