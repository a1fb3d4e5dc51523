"""Acceptance criteria A1-A10, one pass/fail line each."""

import time

import pytest

from prandtl_lab import verify


def _run(cid: str, checks, budget: float | None = None) -> None:
    start = time.perf_counter()
    results = [r for fn in checks for r in fn()]
    elapsed = time.perf_counter() - start
    failed = [r for r in results if not r.passed]
    in_time = budget is None or elapsed < budget
    ok = not failed and in_time
    summary = "; ".join(r.line() for r in (failed or results))
    print(f"{'PASS' if ok else 'FAIL'} {cid} ({len(results)} checks, {elapsed:.1f}s): {summary}")
    assert in_time, f"{cid} took {elapsed:.1f}s, budget {budget}s"
    assert not failed, "\n".join(r.line() for r in failed)


def test_a1_support_curve_constants():
    _run("A1", [verify.check_support_curve], budget=5.0)


def test_a2_psi1_inverse():
    _run("A2", [verify.check_psi1])


def test_a3_far_field_constants():
    _run("A3", [verify.check_far_field])


def test_a4_volume_and_identities():
    _run("A4", [verify.check_volume_and_identities])


@pytest.mark.slow
def test_a5_exact_self_similar_evolution():
    _run("A5", [verify.check_self_similar_evolution], budget=120.0)


@pytest.mark.slow
def test_a6_blowup_time():
    _run("A6", [verify.check_blowup_time])


def test_a7_degenerate_axis():
    _run("A7", [verify.check_degenerate_axis])


def test_a8_taylor_structure():
    _run("A8", [verify.check_taylor])


@pytest.mark.slow
def test_a9_generic_convergence_trend():
    _run("A9", [verify.check_convergence], budget=300.0)


@pytest.mark.slow
def test_a10_stationary_residuals():
    _run("A10", [verify.check_stationary])
