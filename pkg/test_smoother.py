"""
Test script for the successive smoothing optimizer

Tests:
1. Schedule, budget and config validation
2. Gradient tracker running mean
3. Two-point estimator is unbiased on a linear function
4. Smoothed unit step: closed form, Monte-Carlo value and gradient
5. Quadratic minimization within the evaluation budget
6. Determinism, maximize direction, bounds and early stage exit
7. Non-finite objective values are reported
8. Escape from a shallow basin (set FSD_SLOW_TESTS=1 for 100 seeds)

Usage:
    python3 test_smoother.py
"""

import math
import os
import sys
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import numpy as np
from scipy import integrate

from fsd_reshaping.errors import InvalidParameterError, NonFiniteObjectiveError
from fsd_reshaping.solvers.smoother import (
    MAXIMIZE,
    GradientTracker,
    SmootherConfig,
    estimate_gradient,
    minimize,
    smoothed_step_gradient,
    smoothed_step_value,
    smoothed_value,
    track_gradient,
    with_seed,
)

SLOW = os.getenv("FSD_SLOW_TESTS") == "1"


def _step(points):
    return (np.asarray(points)[:, 0] >= 0.0).astype(float)


def _two_basins(x):
    t = float(x[0])
    if 0.5 <= t <= 2.5:
        return -1.0
    if -1.5 <= t <= -1.0:
        return -0.5
    return 0.0


def test_schedule_and_budget():
    """theta_nu schedule, inner steps and evaluation budget"""
    print("\n" + "=" * 70)
    print("TEST 1: Schedule and budget")
    print("=" * 70)

    cfg = SmootherConfig()
    print(f"stages={cfg.stages}, inner={cfg.inner}, budget={cfg.budget}")
    assert cfg.inner == 7, "default inner steps are ceil(sqrt(N))"
    assert cfg.budget == 562
    assert cfg.stage_radius(1) == cfg.theta1
    assert abs(cfg.stage_radius(cfg.stages) - cfg.theta1 / cfg.stages) < 1e-15
    radii = [cfg.stage_radius(nu) for nu in range(1, cfg.stages + 1)]
    assert all(a >= b for a, b in zip(radii, radii[1:])), "radii must not increase"

    for bad in (
        dict(theta1=0.0),
        dict(stages=0),
        dict(inner_steps=0),
        dict(step_size=-1.0),
        dict(extrapolation=-0.5),
        dict(direction="sideways"),
        dict(averaging=1.5),
    ):
        try:
            SmootherConfig(**bad)
        except InvalidParameterError as e:
            print(f"rejected {bad}: {e}")
        else:
            raise AssertionError(f"{bad} should be rejected")

    assert with_seed(cfg, 9).seed == 9

    print("\n✅ TEST PASSED: schedule and budget are correct")


def test_gradient_tracker():
    """Harmonic weights give the running mean"""
    print("\n" + "=" * 70)
    print("TEST 2: Gradient tracker")
    print("=" * 70)

    t = GradientTracker.zeros(2)
    for sample in ([1.0, 0.0], [2.0, 2.0], [3.0, 4.0]):
        t = track_gradient(t, sample)
    print(f"z={t.z}, k={t.k}")
    assert np.allclose(t.z, [2.0, 2.0]) and t.k == 3

    t = track_gradient(GradientTracker.zeros(1), [4.0], lam=0.25)
    assert np.allclose(t.z, [1.0])

    try:
        track_gradient(t, [1.0], lam=2.0)
    except InvalidParameterError:
        pass
    else:
        raise AssertionError("tracker weight above 1 accepted")

    print("\n✅ TEST PASSED: tracker averages samples")


def test_unbiased_on_linear():
    """E[xi] equals the gradient of a linear function"""
    print("\n" + "=" * 70)
    print("TEST 3: Unbiased estimator on a linear function")
    print("=" * 70)

    a = np.array([0.7, -1.3, 0.2])

    def F(points):
        return np.atleast_2d(points) @ a

    for one_sided in (False, True):
        mean, se = estimate_gradient(F, np.zeros(3), 0.3, 42, 100_000, one_sided=one_sided, vectorized=True)
        print(f"one_sided={one_sided}: mean={mean}, se={se}")
        assert np.all(np.abs(mean - a) <= 4.0 * se + 1e-12), "estimate outside 4 standard errors"

    # scalar path agrees on a small sample
    mean, _ = estimate_gradient(lambda x: float(x @ a), np.zeros(3), 0.3, 1, 200)
    assert np.all(np.isfinite(mean))

    print("\n✅ TEST PASSED: estimator is unbiased")


def test_smoothed_step():
    """Mollified unit step against its closed form"""
    print("\n" + "=" * 70)
    print("TEST 4: Smoothed unit step")
    print("=" * 70)

    theta = 0.5
    expected = 1.0 / (theta * math.sqrt(2.0 * math.pi))
    mean, se = estimate_gradient(_step, np.zeros(1), theta, 7, 1_000_000, vectorized=True)
    print(f"gradient at 0: {mean[0]:.5f} (closed form {expected:.5f}, se {se[0]:.5f})")
    assert abs(mean[0] - expected) <= 0.01 * expected
    assert abs(smoothed_step_gradient(0.0, theta) - expected) < 1e-12

    mc = smoothed_value(_step, np.array([0.3]), theta, 3, 100_000, vectorized=True)
    closed = float(smoothed_step_value(0.3, theta))
    print(f"value at 0.3: {mc:.4f} vs {closed:.4f}")
    assert abs(mc - closed) < 0.006

    # as theta shrinks the smoothed step converges to the step from outside
    values = [float(smoothed_step_value(-1.0, 2.0 ** -k)) for k in range(6)]
    print(f"value at -1 for halving theta: {values}")
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-12

    # well F = 1 - 1{0 <= x < 0.1}, min F = 0; grid-min of F_theta falls to it
    grid = np.linspace(-1.0, 1.0, 2001)
    gaps = []
    for k in range(6):
        t = 0.2 * 2.0 ** -k
        F_theta = 1.0 - smoothed_step_value(grid, t) + smoothed_step_value(grid - 0.1, t)
        gaps.append(float(F_theta.min()))
    print(f"grid-min of the smoothed well for halving theta: {gaps}")
    assert all(a > b for a, b in zip(gaps, gaps[1:])), "grid-min must decrease as theta halves"
    assert gaps[0] > 0.5 and gaps[-1] < 1e-6

    well = lambda p: 1.0 - ((p[:, 0] >= 0.0) & (p[:, 0] < 0.1)).astype(float)
    mc_well = smoothed_value(well, np.array([0.05]), 0.05, 11, 200_000, vectorized=True)
    closed_well = 1.0 - float(smoothed_step_value(0.05, 0.05) - smoothed_step_value(-0.05, 0.05))
    assert abs(mc_well - closed_well) < 0.005

    total, _ = integrate.quad(lambda u: float(smoothed_step_gradient(u, theta)), -np.inf, np.inf)
    assert abs(total - 1.0) < 1e-8, "smoothed gradient must integrate to the unit jump"

    h = 1e-6
    numeric = (smoothed_step_value(0.2 + h, theta) - smoothed_step_value(0.2 - h, theta)) / (2 * h)
    assert abs(numeric - smoothed_step_gradient(0.2, theta)) < 1e-6

    print("\n✅ TEST PASSED: smoothed step matches its closed form")


def test_quadratic():
    """|x|^2 from (1, 1) with the default schedule"""
    print("\n" + "=" * 70)
    print("TEST 5: Quadratic minimization")
    print("=" * 70)

    cfg = SmootherConfig()
    result = minimize(lambda x: float(x @ x), np.array([1.0, 1.0]), cfg)
    print(f"x_best={result.x_best}, value={result.value_best:.2e}, evaluations={result.evaluations}")
    assert result.value_best < 1e-2
    assert result.evaluations == cfg.budget == 562
    assert len(result.stage_trace) == cfg.stages
    assert result.value_best == float(result.x_best @ result.x_best), "value_best is F at x_best"

    one_sided = minimize(lambda x: float(x @ x), np.array([1.0, 1.0]), replace(cfg, one_sided=True))
    assert one_sided.evaluations == cfg.budget
    assert one_sided.value_best < 1e-1

    print("\n✅ TEST PASSED: quadratic is minimized")


def test_determinism_direction_bounds():
    """Seeds, maximization, clipping and tracker exit"""
    print("\n" + "=" * 70)
    print("TEST 6: Determinism, direction and bounds")
    print("=" * 70)

    F = lambda x: float(np.sum((x - 0.25) ** 2))
    a = minimize(F, np.zeros(3), SmootherConfig(seed=5))
    b = minimize(F, np.zeros(3), SmootherConfig(seed=5))
    c = minimize(F, np.zeros(3), SmootherConfig(seed=6))
    assert np.array_equal(a.x_best, b.x_best) and a.value_best == b.value_best
    assert not np.array_equal(a.x_final, c.x_final), "different seeds should give different paths"

    target = np.array([0.2, 0.3])
    up = minimize(lambda x: -float(np.sum((x - target) ** 2)), np.zeros(2), SmootherConfig(direction=MAXIMIZE))
    print(f"maximize: x_best={up.x_best}, value={up.value_best:.2e}")
    assert -1e-2 < up.value_best <= 0.0, "value_best is reported in F's own sense"

    lower, upper = np.zeros(2), np.ones(2)
    boxed = minimize(lambda x: float(x.sum()), np.array([0.8, 0.9]), SmootherConfig(), bounds=(lower, upper))
    print(f"bounded: x_best={boxed.x_best}")
    assert np.all(boxed.x_best >= lower) and np.all(boxed.x_best <= upper)
    assert boxed.value_best < 0.1

    flat_cfg = SmootherConfig(stages=5, inner_steps=10, tracker_tolerance=1e-9)
    flat = minimize(lambda x: 1.0, np.zeros(2), flat_cfg)
    print(f"constant F: evaluations={flat.evaluations} of budget {flat_cfg.budget}")
    assert all(rec.steps == 2 for rec in flat.stage_trace)
    assert flat.evaluations == 1 + 2 * 2 * 5 + 1

    print("\n✅ TEST PASSED: runs are reproducible and respect direction and bounds")


def test_non_finite():
    """NaN values raise with the offending point"""
    print("\n" + "=" * 70)
    print("TEST 7: Non-finite objective")
    print("=" * 70)

    try:
        minimize(lambda x: float("nan") if x[0] > 0.5 else 0.0, np.array([0.6]), SmootherConfig(stages=2))
    except NonFiniteObjectiveError as e:
        print(f"raised: {e}")
    else:
        raise AssertionError("NaN objective accepted")

    # the start point is checked before the first stage samples anything
    calls = []

    def inf_at_start(x):
        calls.append(x.copy())
        return float("inf") if abs(x[0] - 2.0) < 1e-12 else float(x[0] ** 2)

    try:
        minimize(inf_at_start, np.array([2.0]), SmootherConfig(stages=3))
    except NonFiniteObjectiveError as e:
        print(f"start rejected after {len(calls)} evaluation(s): {e}")
    else:
        raise AssertionError("infinite value at the start accepted")
    assert len(calls) == 1 and calls[0][0] == 2.0

    # a finite start that beats every sampled point is kept
    pit = minimize(lambda x: -1.0 if np.all(x == 0.3) else float(x @ x), np.array([0.3, 0.3]), SmootherConfig(stages=2))
    assert pit.value_best == -1.0 and np.array_equal(pit.x_best, [0.3, 0.3])

    print("\n✅ TEST PASSED: non-finite values are rejected")


def test_escape_shallow_basin():
    """Start in the shallow basin, end in the deep one"""
    print("\n" + "=" * 70)
    print("TEST 8: Escape from a shallow basin")
    print("=" * 70)

    seeds, required = (100, 95) if SLOW else (20, 18)
    cfg = SmootherConfig(theta1=2.0)
    hits = 0
    for seed in range(seeds):
        result = minimize(_two_basins, np.array([-1.25]), with_seed(cfg, seed))
        hits += result.value_best == -1.0
    print(f"deep basin reached in {hits}/{seeds} runs")
    assert hits >= required

    print("\n✅ TEST PASSED: large radius escapes the shallow basin")


def main():
    """Run all tests"""
    print("\n" + "=" * 70)
    print("SMOOTHER TEST SUITE")
    print("=" * 70)

    tests = [
        ("Schedule and Budget", test_schedule_and_budget),
        ("Gradient Tracker", test_gradient_tracker),
        ("Unbiased Estimator", test_unbiased_on_linear),
        ("Smoothed Step", test_smoothed_step),
        ("Quadratic", test_quadratic),
        ("Determinism and Bounds", test_determinism_direction_bounds),
        ("Non-finite Objective", test_non_finite),
        ("Shallow Basin Escape", test_escape_shallow_basin),
    ]

    passed = 0
    failed = 0

    for test_name, test_func in tests:
        try:
            test_func()
            passed += 1
        except Exception as e:
            print(f"\n❌ TEST FAILED: {test_name}")
            print(f"   Error: {e}")
            import traceback
            traceback.print_exc()
            failed += 1

    print("\n" + "=" * 70)
    print("TEST SUMMARY")
    print("=" * 70)
    print(f"✅ Passed: {passed}/{len(tests)}")
    if failed > 0:
        print(f"❌ Failed: {failed}/{len(tests)}")
    else:
        print("🎉 ALL TESTS PASSED!")
    print("=" * 70)

    return failed == 0


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
