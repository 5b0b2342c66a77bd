"""Fast self-contained invariant checks, runnable from a fresh checkout.

Each check re-derives its expected values independently of the code path it
exercises (extended precision, finite differences, brute force) and reports
a named pass/fail with its tolerance. The whole suite is CPU-cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import binning, geometry, losses


@dataclass
class CheckResult:
    name: str
    tolerance: str
    passed: bool
    detail: str = ""


def _check_angle_round_trip(rng) -> CheckResult:
    worst = 0.0
    for _ in range(1000):
        pitch = rng.uniform(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3)
        yaw = rng.uniform(-np.pi, np.pi)
        angles = geometry.GazeAngles(pitch, yaw)
        back = geometry.vector_to_angles(geometry.angles_to_vector(angles))
        worst = max(worst, abs(back.pitch - pitch), abs(back.yaw - yaw))
    return CheckResult("angles<->vector round trip", "1e-9 rad",
                       worst <= 1e-9, f"max deviation {worst:.3e}")


def _check_angular_error_oracle(rng) -> CheckResult:
    # Independent oracle in extended precision (80-bit on x86 linux).
    worst = 0.0
    for _ in range(1000):
        a = rng.normal(size=3)
        b = rng.normal(size=3)
        measured = geometry.angular_error(a / np.linalg.norm(a),
                                          b / np.linalg.norm(b))
        al = a.astype(np.longdouble)
        bl = b.astype(np.longdouble)
        cos = (al @ bl) / (np.sqrt(al @ al) * np.sqrt(bl @ bl))
        expected = float(np.degrees(np.arccos(
            np.clip(cos, np.longdouble(-1), np.longdouble(1)))))
        worst = max(worst, abs(measured - expected))
    return CheckResult("angular error vs extended-precision oracle",
                       "1e-6 deg", worst <= 1e-6, f"max deviation {worst:.3e}")


def _check_softmax(rng) -> CheckResult:
    logits = rng.normal(size=(50, 9)) * 5
    probs = losses.stable_softmax(logits)
    shifted = losses.stable_softmax(logits + 123.0)
    big = losses.stable_softmax(np.array([1000.0, 0.0]))
    ok = (np.all(np.abs(probs.sum(axis=1) - 1) <= 1e-9)
          and np.all(np.abs(probs - shifted) <= 1e-12)
          and np.all(np.isfinite(big)) and abs(big[0] - 1.0) < 1e-9)
    return CheckResult("softmax simplex / shift invariance / overflow",
                       "1e-9", bool(ok))


def _check_decode_one_hot() -> CheckResult:
    for scheme in (binning.mpiigaze_scheme(), binning.gaze360_scheme()):
        for i in range(scheme.n_bins):
            one_hot = np.zeros(scheme.n_bins)
            one_hot[i] = 1.0
            if binning.decode_expectation(one_hot, scheme) != scheme.centers[i]:
                return CheckResult("one-hot decode equals bin center",
                                   "exact", False, f"bin {i} of {scheme}")
    return CheckResult("one-hot decode equals bin center", "exact", True)


def _check_bin_round_trip(rng) -> CheckResult:
    worst = 0.0
    for scheme in (binning.mpiigaze_scheme(), binning.gaze360_scheme()):
        angles = rng.uniform(scheme.min_deg, scheme.max_deg, size=10_000)
        for angle in angles:
            target = binning.bin_target(angle, scheme)
            decoded = binning.decode_expectation(target.one_hot, scheme)
            worst = max(worst, abs(decoded - angle) / (scheme.width / 2))
    return CheckResult("bin/decode round trip within half a bin width",
                       "width/2", worst <= 1.0, f"worst ratio {worst:.4f}")


def _check_loss_gradient(rng) -> CheckResult:
    scheme = binning.BinScheme(-15.0, 15.0, 6)
    step = 1e-4
    worst = 0.0
    for beta in (0.0, 1.0, 2.0):
        config = losses.LossConfig(beta=beta, scheme=scheme)
        for _ in range(100):
            logits = rng.normal(size=(4, scheme.n_bins))
            targets = [binning.bin_target(a, scheme)
                       for a in rng.uniform(-15, 15, size=4)]
            analytic = losses.combined_loss_grad(logits, targets, config)
            for row in range(logits.shape[0]):
                for col in range(logits.shape[1]):
                    bumped = logits.copy()
                    bumped[row, col] += step
                    upper = losses.combined_loss(bumped, targets, config).total
                    bumped[row, col] -= 2 * step
                    lower = losses.combined_loss(bumped, targets, config).total
                    numeric = (upper - lower) / (2 * step)
                    scale = max(abs(numeric), abs(analytic[row, col]), 1e-8)
                    worst = max(worst,
                                abs(numeric - analytic[row, col]) / scale)
    return CheckResult("combined-loss gradient vs central differences",
                       "1e-4 relative", worst < 1e-4, f"max rel err {worst:.3e}")


def _check_loss_additivity(rng) -> CheckResult:
    scheme = binning.BinScheme(-10.0, 10.0, 5)
    config = losses.LossConfig(beta=1.0, scheme=scheme)
    yaw_logits = rng.normal(size=(3, 5))
    pitch_logits = rng.normal(size=(3, 5))
    yaw_targets = [binning.bin_target(a, scheme)
                   for a in rng.uniform(-10, 10, size=3)]
    pitch_targets = [binning.bin_target(a, scheme)
                     for a in rng.uniform(-10, 10, size=3)]
    total, yaw_out, pitch_out = losses.total_gaze_loss(
        yaw_logits, pitch_logits, yaw_targets, pitch_targets, config)
    gap = abs(total - (yaw_out.total + pitch_out.total))
    return CheckResult("two-angle loss is exactly additive", "1e-12",
                       gap <= 1e-12, f"gap {gap:.3e}")


def _check_normalization(rng) -> CheckResult:
    worst_roll = worst_distance = 0.0
    for _ in range(20):
        # Random rotation via QR, det fixed to +1.
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        center = rng.normal(size=3) * 100 + np.array([0, 0, 700.0])
        params = geometry.NormalizationParams(
            camera_matrix=np.array([[640.0, 0, 320], [0, 640.0, 240],
                                    [0, 0, 1.0]]),
            head_rotation=q,
            face_center=center,
            output_size=(64, 64),
        )
        image = rng.integers(0, 255, size=(48, 48, 3), dtype=np.uint8)
        gaze = geometry.GazeVector(*rng.normal(size=3))
        result = geometry.normalize_sample(image, params, gaze)
        rolled = result.rotation_applied @ q
        worst_roll = max(worst_roll, abs(geometry.rotation_roll(rolled)))
        virtual = np.diag([1, 1, result.scale]) @ result.rotation_applied @ center
        worst_distance = max(
            worst_distance,
            abs(np.linalg.norm(virtual) - params.target_distance))
    ok = worst_roll <= 1e-6 and worst_distance <= 1e-6
    return CheckResult("normalization kills roll / fixes distance", "1e-6",
                       ok, f"roll {worst_roll:.2e}, dist {worst_distance:.2e}")


def run_selfcheck(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        _check_angle_round_trip(rng),
        _check_angular_error_oracle(rng),
        _check_softmax(rng),
        _check_decode_one_hot(),
        _check_bin_round_trip(rng),
        _check_loss_gradient(rng),
        _check_loss_additivity(rng),
        _check_normalization(rng),
    ]


def format_results(results: list[CheckResult]) -> str:
    name_width = max(len(r.name) for r in results)
    tol_width = max(len(r.tolerance) for r in results)
    lines = []
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        line = (f"{status}  {result.name.ljust(name_width)}  "
                f"tol={result.tolerance.ljust(tol_width)}")
        if result.detail:
            line += f"  {result.detail}"
        lines.append(line)
    return "\n".join(lines)
