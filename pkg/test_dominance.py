"""
Test script for reference profiles and dominance residuals

Tests:
1. Step reference: CDF and quantile jump tables
2. Known portfolio checked against the step reference (bond at 13% and 12.5%)
3. CDF and quantile residuals agree on feasibility
4. Reference built from a portfolio, with and without relaxation
5. VaR profiles and merged constraints
6. Vectorized residual matches the scalar one
7. Checking the jump points is exact; monotone in the relaxation
8. Weight box and full feasibility report

Usage:
    python3 test_dominance.py
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import numpy as np

from fsd_reshaping.data.presets import STEP_REFERENCE
from fsd_reshaping.errors import DimensionError, InvalidParameterError, PreconditionError
from fsd_reshaping.tools.dataset import load_csv
from fsd_reshaping.tools.distribution import ScenarioMatrix, empirical_cdf
from fsd_reshaping.tools.dominance import (
    CDF_FORM,
    QUANTILE_FORM,
    FeasibleBox,
    G,
    H,
    g_batch,
    is_feasible,
    merge_profiles,
    reference_from_portfolio,
    reference_from_steps,
    residual,
    to_quantile_form,
    var_profile,
)

TABLE_PORTFOLIO = np.array([0.1229, 0.0085, 0.8675])


def _three_assets(bond=0.13):
    s = load_csv().scenarios.select([3, 8, 9])
    return s.with_constant_column(2, bond)


def test_step_reference_tables():
    """Jump tables of the four-step reference"""
    print("\n" + "=" * 70)
    print("TEST 1: Step reference tables")
    print("=" * 70)

    ref = reference_from_steps(STEP_REFERENCE)
    print(f"T_ref={ref.cdf_jumps}, F_ref={ref.cdf_at_jumps}")
    print(f"A_ref={ref.quantile_jumps}, Q_ref={ref.quantile_at_jumps}")
    assert np.allclose(ref.cdf_jumps, [0.05, 0.1, 0.11, 0.125])
    assert np.allclose(ref.cdf_at_jumps, [0.0, 0.2, 0.4, 0.6]), "F_ref counts mass strictly below each jump"
    assert np.allclose(ref.quantile_jumps, [0.0, 0.2, 0.4, 0.6])
    assert np.allclose(ref.quantile_at_jumps, [0.05, 0.1, 0.11, 0.125])
    assert ref.top_quantile == 0.125
    assert ref.form == CDF_FORM

    # zero-level pairs only restate F = 0
    padded = reference_from_steps([(0.0, 0.0)] + list(STEP_REFERENCE))
    assert np.array_equal(padded.cdf_jumps, ref.cdf_jumps)

    for bad in ([(0.1, 0.5)], [(0.2, 0.5), (0.1, 1.0)], [(0.1, 0.6), (0.2, 0.4), (0.3, 1.0)], []):
        try:
            reference_from_steps(bad)
        except InvalidParameterError as e:
            print(f"rejected {bad}: {e}")
        else:
            raise AssertionError(f"steps {bad} should be rejected")

    print("\n✅ TEST PASSED: step reference tables are correct")


def test_known_portfolio():
    """(0.1229, 0.0085, 0.8675) on assets 4, 9 and the bond"""
    print("\n" + "=" * 70)
    print("TEST 2: Known portfolio against the step reference")
    print("=" * 70)

    ref = reference_from_steps(STEP_REFERENCE)
    s = _three_assets(0.13)
    g, h = G(s, TABLE_PORTFOLIO, ref), H(s, TABLE_PORTFOLIO, ref)
    print(f"bond 13%:   G={g:.6f}, H={h:.6f}")
    assert g <= 0 and h <= 0, "portfolio should dominate the reference with a 13% bond"

    s = _three_assets(0.125)
    g, h = G(s, TABLE_PORTFOLIO, ref), H(s, TABLE_PORTFOLIO, ref)
    print(f"bond 12.5%: G={g:.6f}, H={h:.6f}")
    assert g >= 1 / 18 - 1e-12, "the 1937 return falls below 5% with a 12.5% bond"
    assert h > 0

    print("\n✅ TEST PASSED: feasibility depends on the bond return as expected")


def test_cdf_and_quantile_agree():
    """G <= 0 exactly when H <= 0"""
    print("\n" + "=" * 70)
    print("TEST 3: CDF and quantile residuals agree")
    print("=" * 70)

    ref = reference_from_steps(STEP_REFERENCE)
    s = _three_assets()
    rng = np.random.default_rng(11)
    feasible = 0
    for _ in range(2000):
        x = rng.dirichlet([0.5, 0.5, 4.0])
        g_ok, h_ok = G(s, x, ref) <= 0, H(s, x, ref) <= 0
        assert g_ok == h_ok, f"residuals disagree at {x}"
        feasible += g_ok
    print(f"{feasible}/2000 random portfolios feasible")
    assert 0 < feasible < 2000, "sample should contain both feasible and infeasible portfolios"

    q_ref = to_quantile_form(ref)
    assert q_ref.form == QUANTILE_FORM
    assert residual(s, TABLE_PORTFOLIO, q_ref) == H(s, TABLE_PORTFOLIO, ref)

    print("\n✅ TEST PASSED: both residuals give the same feasible set")


def test_reference_from_portfolio():
    """Self-reference and relaxation by delta"""
    print("\n" + "=" * 70)
    print("TEST 4: Reference built from a portfolio")
    print("=" * 70)

    s = load_csv().scenarios.select([0, 1])
    x_ref = np.array([0.31, 0.69])

    for form in (CDF_FORM, QUANTILE_FORM):
        exact = reference_from_portfolio(s, x_ref, 0.0, form)
        assert G(s, x_ref, exact) == 0.0, "a portfolio sits exactly on its own profile"
        assert H(s, x_ref, exact) == 0.0

        relaxed = reference_from_portfolio(s, x_ref, 0.05, form)
        assert residual(s, x_ref, relaxed) <= 0
        assert all(d == 0.05 for d in relaxed.shift)
        print(f"{form}: relaxed residual {residual(s, x_ref, relaxed):.4f}")

    relaxed = reference_from_portfolio(s, x_ref, 0.05, QUANTILE_FORM)
    base_q = reference_from_portfolio(s, x_ref, 0.0, QUANTILE_FORM).quantile
    assert np.allclose(relaxed.quantile.values, base_q.values - 0.05)

    try:
        reference_from_portfolio(s, x_ref, [0.05, 0.05], CDF_FORM)
    except DimensionError:
        pass
    else:
        raise AssertionError("shift table of the wrong length accepted")

    try:
        reference_from_portfolio(s, x_ref, -0.01)
    except InvalidParameterError:
        pass
    else:
        raise AssertionError("negative shift accepted")

    print("\n✅ TEST PASSED: portfolio references behave as expected")


def test_var_profiles_and_merge():
    """Single VaR constraint and intersection of constraints"""
    print("\n" + "=" * 70)
    print("TEST 5: VaR profiles and merged constraints")
    print("=" * 70)

    single = ScenarioMatrix([[1.0], [2.0], [3.0], [4.0]])
    loose = var_profile(0.5, 2.5, 0.0)
    tight = var_profile(0.25, 2.5, 0.0)
    assert G(single, [1.0], loose) <= 0
    assert abs(G(single, [1.0], tight) - 0.25) < 1e-12
    floor = var_profile(0.25, 2.5, 1.5)
    assert G(single, [1.0], floor) > 0, "a return below the floor violates the profile"

    s = _three_assets()
    a = reference_from_steps(STEP_REFERENCE)
    b = var_profile(0.4, 0.12, 0.0)
    merged = merge_profiles([a, b])
    rng = np.random.default_rng(5)
    for _ in range(1000):
        x = rng.dirichlet([0.5, 0.5, 4.0])
        both = G(s, x, a) <= 0 and G(s, x, b) <= 0
        assert (G(s, x, merged) <= 0) == both, f"merged profile disagrees at {x}"

    assert merge_profiles([a]) is a
    assert merge_profiles([a], QUANTILE_FORM).form == QUANTILE_FORM

    try:
        var_profile(0.4, 0.1, 0.2)
    except InvalidParameterError:
        pass
    else:
        raise AssertionError("floor above q_alpha accepted")

    print("\n✅ TEST PASSED: merged profile is the intersection")


def test_g_batch():
    """Vectorized G over many points"""
    print("\n" + "=" * 70)
    print("TEST 6: Vectorized residual")
    print("=" * 70)

    ref = reference_from_steps(STEP_REFERENCE)
    s = _three_assets()
    points = np.random.default_rng(2).dirichlet([1.0, 1.0, 2.0], size=500)
    batch = g_batch(s, points, ref)
    scalar = np.array([G(s, p, ref) for p in points])
    print(f"max |batch - scalar| = {np.max(np.abs(batch - scalar)):.3e}")
    assert np.allclose(batch, scalar)

    try:
        g_batch(s, points[:, :2], ref)
    except DimensionError:
        pass
    else:
        raise AssertionError("points of the wrong width accepted")

    print("\n✅ TEST PASSED: batch residual matches")


def test_jump_points_suffice():
    """Checking the reference jumps equals checking a fine grid of t"""
    print("\n" + "=" * 70)
    print("TEST 7: Jump points suffice")
    print("=" * 70)

    rng = np.random.default_rng(8)
    # offset keeps grid points off the 0.01 lattice the data lives on
    t_grid = np.arange(-0.5, 0.5, 1e-3) + 5e-4
    violated = 0
    for _ in range(200):
        m = int(rng.integers(2, 9))
        s = ScenarioMatrix(np.round(rng.normal(0.05, 0.15, size=(m, 1)), 2))
        thresholds = np.sort(rng.choice(np.round(np.arange(-0.2, 0.2, 0.01), 2), size=3, replace=False))
        ref = reference_from_steps(zip(thresholds, [0.3, 0.6, 1.0]))
        brute = np.max(empirical_cdf(s, [1.0])(t_grid) - ref.cdf(t_grid))
        g = G(s, [1.0], ref)
        assert (g > 0) == (brute > 0), f"jump check {g} disagrees with grid check {brute}"
        violated += g > 0
    print(f"{violated}/200 instances violated")
    assert 0 < violated < 200

    # larger relaxation never hurts
    s = load_csv().scenarios.select([0, 1])
    x = np.array([0.5, 0.5])
    residuals = [G(s, x, reference_from_portfolio(s, [0.3, 0.7], d)) for d in (0.0, 0.01, 0.02, 0.05, 0.1)]
    print(f"G for growing delta: {residuals}")
    assert all(a >= b for a, b in zip(residuals, residuals[1:]))

    bond = np.zeros(10)
    bond[-1] = 1.0
    full = load_csv().scenarios
    assert is_feasible(full, bond, reference_from_steps(STEP_REFERENCE), FeasibleBox.nonnegative(10)).feasible

    print("\n✅ TEST PASSED: finite jump check is exact")


def test_feasible_box():
    """Budget and lower bounds"""
    print("\n" + "=" * 70)
    print("TEST 8: Weight box and feasibility report")
    print("=" * 70)

    box = FeasibleBox([0.1, 0.0, 0.2])
    assert abs(box.radius - 0.7) < 1e-15
    lo, hi = box.root_bounds()
    assert np.allclose(lo, [0.1, 0.0, 0.2]) and np.allclose(hi, [0.8, 0.7, 0.9])
    assert box.contains(np.array([0.1, 0.3, 0.6]))
    assert not box.contains(np.array([0.1, 0.4, 0.6]))
    assert not box.contains(np.array([0.05, 0.3, 0.6]))

    try:
        FeasibleBox([0.6, 0.6])
    except PreconditionError as e:
        print(f"rejected: {e}")
    else:
        raise AssertionError("empty weight set accepted")

    ref = reference_from_steps(STEP_REFERENCE)
    s = _three_assets()
    report = is_feasible(s, TABLE_PORTFOLIO, ref, FeasibleBox.nonnegative(3))
    print(report)
    assert report.feasible
    assert report.budget_residual == 0.0 and report.lower_residual == 0.0

    over = is_feasible(s, TABLE_PORTFOLIO * 1.2, ref, FeasibleBox.nonnegative(3))
    assert not over.feasible
    assert abs(over.budget_residual - (1.2 * TABLE_PORTFOLIO.sum() - 1.0)) < 1e-12

    try:
        is_feasible(s, TABLE_PORTFOLIO, ref, FeasibleBox.nonnegative(2))
    except DimensionError:
        pass
    else:
        raise AssertionError("box dimension mismatch accepted")

    print("\n✅ TEST PASSED: box and report are consistent")


def main():
    """Run all tests"""
    print("\n" + "=" * 70)
    print("DOMINANCE TEST SUITE")
    print("=" * 70)

    tests = [
        ("Step Reference Tables", test_step_reference_tables),
        ("Known Portfolio", test_known_portfolio),
        ("CDF/Quantile Agreement", test_cdf_and_quantile_agree),
        ("Portfolio Reference", test_reference_from_portfolio),
        ("VaR Profiles and Merge", test_var_profiles_and_merge),
        ("Batch Residual", test_g_batch),
        ("Jump Points Suffice", test_jump_points_suffice),
        ("Feasible Box", test_feasible_box),
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
