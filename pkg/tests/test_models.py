"""Dual-head model contracts: shapes, determinism, decoding, checkpoints."""

import math

import numpy as np
import pytest
import torch

from gazekit.binning import BinScheme, gaze360_scheme
from gazekit.losses import stable_softmax
from gazekit.models import (
    ModelConfig,
    build_model,
    load_checkpoint,
    predict_gaze,
    predict_logits,
    preprocess_images,
    save_checkpoint,
)


@pytest.fixture
def toy_config():
    return ModelConfig(backbone="toy-cnn", n_bins=6, input_size=(64, 64))


def _images(rng, n=2, size=64):
    return rng.integers(0, 255, size=(n, size, size, 3), dtype=np.uint8)


class TestBuildAndForward:
    def test_toy_shape_contract(self, toy_config, rng):
        model = build_model(toy_config, seed=0)
        batch = preprocess_images(_images(rng, n=2), toy_config)
        yaw_logits, pitch_logits = model(batch)
        assert yaw_logits.shape == (2, 6)
        assert pitch_logits.shape == (2, 6)

    def test_resnet50_head_widths(self):
        config = ModelConfig(backbone="resnet50-pretrained", n_bins=90,
                             pretrained=False)
        model = build_model(config, seed=0)
        assert model.yaw_head.out_features == 90
        assert model.pitch_head.out_features == 90
        assert model.yaw_head.in_features == model.pitch_head.in_features

    def test_same_seed_same_parameters(self, toy_config):
        first = build_model(toy_config, seed=42)
        second = build_model(toy_config, seed=42)
        for a, b in zip(first.parameters(), second.parameters()):
            assert torch.equal(a, b)

    def test_different_seeds_differ(self, toy_config):
        first = build_model(toy_config, seed=1)
        second = build_model(toy_config, seed=2)
        assert not torch.equal(first.yaw_head.weight, second.yaw_head.weight)

    def test_heads_have_independent_parameters(self, toy_config):
        model = build_model(toy_config, seed=0)
        assert model.yaw_head.weight.data_ptr() != \
            model.pitch_head.weight.data_ptr()
        assert torch.all(model.yaw_head.bias == 0)
        assert torch.all(model.pitch_head.bias == 0)

    def test_canonical_batch_of_16(self, toy_config, rng):
        model = build_model(toy_config, seed=0)
        batch = preprocess_images(_images(rng, n=16), toy_config)
        yaw_logits, pitch_logits = model(batch)
        assert yaw_logits.shape == (16, 6)
        assert pitch_logits.shape == (16, 6)

    def test_zero_image_batch_rejected(self, toy_config):
        model = build_model(toy_config, seed=0)
        with pytest.raises(ValueError, match="empty"):
            model(torch.zeros((0, 3, 64, 64)))

    def test_too_small_input_rejected(self, toy_config):
        model = build_model(toy_config, seed=0)
        with pytest.raises(ValueError, match="at least"):
            model(torch.zeros((1, 3, 16, 16)))

    def test_toy_accepts_any_size_above_minimum(self, toy_config, rng):
        model = build_model(toy_config, seed=0)
        for size in (32, 50, 128):
            batch = preprocess_images(_images(rng, n=1, size=size), toy_config)
            yaw_logits, _ = model(batch)
            assert yaw_logits.shape == (1, 6)

    def test_batch_independence_in_eval_mode(self, toy_config, rng):
        model = build_model(toy_config, seed=0)
        images = _images(rng, n=3)
        duplicated = np.concatenate([images, images[1:2]])
        yaw_logits, pitch_logits = predict_logits(model, duplicated)
        np.testing.assert_array_equal(yaw_logits[3], yaw_logits[1])
        np.testing.assert_array_equal(pitch_logits[3], pitch_logits[1])

    def test_unknown_backbone_rejected(self):
        with pytest.raises(ValueError, match="backbone"):
            ModelConfig(backbone="vgg16")


class _FakeResnet(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.fc = torch.nn.Linear(8, 1)

    def forward(self, x):  # pragma: no cover - never exercised here
        return self.fc(x)


class TestPretrainedFallback:
    def test_fetch_failure_warns_and_falls_back(self, monkeypatch):
        import gazekit.models as models_module

        calls = []

        def fake_loader(pretrained):
            calls.append(pretrained)
            if pretrained:
                raise OSError("network unreachable")
            return _FakeResnet()

        monkeypatch.setattr(models_module, "_load_resnet50", fake_loader)
        config = ModelConfig(backbone="resnet50-pretrained", n_bins=4,
                             pretrained=True)
        with pytest.warns(UserWarning, match="falling back"):
            model = models_module.build_model(config, seed=0)
        assert calls == [True, False]
        assert model.yaw_head.out_features == 4
        assert model.yaw_head.in_features == 8


class TestPredictGaze:
    def test_constant_one_hot_head_decodes_to_center(self, toy_config, rng):
        scheme = BinScheme(-18.0, 18.0, 6)
        model = build_model(toy_config, seed=0)
        # Zero weights + dominant bias: logits are constant one-hot at bin 4
        # regardless of the image.
        with torch.no_grad():
            model.yaw_head.weight.zero_()
            model.yaw_head.bias.zero_()
            model.yaw_head.bias[4] = 80.0
        angles = predict_gaze(model, _images(rng, n=3), scheme)
        for prediction in angles:
            assert prediction.yaw_deg == pytest.approx(scheme.centers[4],
                                                       abs=1e-9)

    def test_predictions_bounded_by_scheme(self, toy_config, rng):
        scheme = BinScheme(-18.0, 18.0, 6)
        model = build_model(toy_config, seed=3)
        for prediction in predict_gaze(model, _images(rng, n=8), scheme):
            assert scheme.centers[0] <= prediction.yaw_deg <= scheme.centers[-1]
            assert scheme.centers[0] <= prediction.pitch_deg <= scheme.centers[-1]

    def test_matches_manual_composition(self, toy_config, rng):
        scheme = BinScheme(-18.0, 18.0, 6)
        model = build_model(toy_config, seed=1)
        images = _images(rng, n=5)
        predictions = predict_gaze(model, images, scheme)
        yaw_logits, pitch_logits = predict_logits(model, images)
        manual_yaw = stable_softmax(yaw_logits) @ scheme.centers
        manual_pitch = stable_softmax(pitch_logits) @ scheme.centers
        for i, prediction in enumerate(predictions):
            assert prediction.yaw_deg == pytest.approx(manual_yaw[i], abs=1e-6)
            assert prediction.pitch_deg == pytest.approx(manual_pitch[i],
                                                         abs=1e-6)

    def test_pitch_clamped_into_sphere(self, rng):
        # A wide scheme can decode pitch past +/-90 deg; the angles must
        # still construct.
        scheme = gaze360_scheme()
        config = ModelConfig(backbone="toy-cnn", n_bins=90)
        model = build_model(config, seed=0)
        with torch.no_grad():
            model.pitch_head.weight.zero_()
            model.pitch_head.bias.zero_()
            model.pitch_head.bias[-1] = 80.0  # decodes to 178 deg
        predictions = predict_gaze(model, _images(rng, n=1), scheme)
        assert predictions[0].pitch == pytest.approx(math.pi / 2)

    def test_scheme_width_mismatch_rejected(self, toy_config, rng):
        model = build_model(toy_config, seed=0)
        with pytest.raises(ValueError, match="bins"):
            predict_gaze(model, _images(rng, n=1), BinScheme(-10, 10, 5))


class TestGradientFlow:
    def test_one_step_decreases_loss_and_reaches_backbone(self, toy_config, rng):
        from gazekit.training import _combined_loss_torch

        scheme = BinScheme(-18.0, 18.0, 6)
        model = build_model(toy_config, seed=0)
        batch = preprocess_images(_images(rng, n=8), toy_config)
        yaw_idx = torch.tensor(rng.integers(0, 6, size=8))
        yaw_deg = torch.tensor(scheme.centers[yaw_idx.numpy()],
                               dtype=torch.float32)
        centers = torch.tensor(scheme.centers, dtype=torch.float32)

        def loss_value():
            yaw_logits, pitch_logits = model(batch)
            yaw_total, _, _ = _combined_loss_torch(
                yaw_logits, yaw_idx, yaw_deg, centers, 1.0)
            pitch_total, _, _ = _combined_loss_torch(
                pitch_logits, yaw_idx, yaw_deg, centers, 1.0)
            return yaw_total + pitch_total

        optimizer = torch.optim.SGD(model.parameters(), lr=1e-5)
        before = loss_value()
        optimizer.zero_grad()
        before.backward()
        for name, parameter in model.named_parameters():
            assert parameter.grad is not None, name
        optimizer.step()
        after = loss_value()
        assert after.item() < before.item()


class TestCheckpoints:
    def test_round_trip_bit_equal_predictions(self, toy_config, rng, tmp_path):
        scheme = BinScheme(-18.0, 18.0, 6)
        model = build_model(toy_config, seed=0)
        images = _images(rng, n=4)
        path = tmp_path / "model.pt"
        save_checkpoint(model, scheme, path)
        restored, restored_scheme = load_checkpoint(path)
        assert restored_scheme == scheme
        original_yaw, original_pitch = predict_logits(model, images)
        restored_yaw, restored_pitch = predict_logits(restored, images)
        np.testing.assert_array_equal(original_yaw, restored_yaw)
        np.testing.assert_array_equal(original_pitch, restored_pitch)

    def test_bin_mismatch_rejected(self, tmp_path, toy_config):
        model = build_model(toy_config, seed=0)
        path = tmp_path / "bad.pt"
        save_checkpoint(model, BinScheme(-18.0, 18.0, 6), path)
        payload = torch.load(path, weights_only=False)
        payload["bin_scheme"]["n_bins"] = 9
        torch.save(payload, path)
        with pytest.raises(ValueError, match="inconsistent"):
            load_checkpoint(path)

    def test_unknown_version_rejected(self, tmp_path, toy_config):
        model = build_model(toy_config, seed=0)
        path = tmp_path / "old.pt"
        save_checkpoint(model, BinScheme(-18.0, 18.0, 6), path)
        payload = torch.load(path, weights_only=False)
        payload["format_version"] = 99
        torch.save(payload, path)
        with pytest.raises(ValueError, match="version"):
            load_checkpoint(path)
