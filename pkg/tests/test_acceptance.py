"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one pass/fail line; the same criterion functions back the
`hflow verify` subcommand.
"""

import pytest

from hflow import acceptance


def _run(fn, **kw):
    result = fn(**kw)
    line = f"{'PASS' if result['passed'] else 'FAIL'} {result['name']}: {result['details']}"
    print(line)
    assert result["passed"], line


def test_criterion_1_table1_dictionary():
    _run(acceptance.criterion_table1)


def test_criterion_2_w1w3_positive_scalar():
    _run(acceptance.criterion_w1w3_positive)


def test_criterion_3_w1w3_zero_scalar():
    _run(acceptance.criterion_w1w3_zero)


def test_criterion_4_nk_cone_flow():
    _run(acceptance.criterion_nk_cone)


def test_criterion_5_family_closed_form():
    _run(acceptance.criterion_family_closed_form)


def test_criterion_6_abc_brandhuber():
    _run(acceptance.criterion_abc)


def test_criterion_7_invariant_drift():
    _run(acceptance.criterion_invariant_drift)


def test_criterion_8_conservation_law():
    _run(acceptance.criterion_conservation)


def test_criterion_9_nk_uniqueness_solver():
    _run(acceptance.criterion_nk_solver)


def test_criterion_10_sweep_reproduction(tmp_path):
    _run(acceptance.criterion_sweep, tmp_dir=str(tmp_path), workers=4)


def test_nu_report_value():
    nu = acceptance.nu_report()
    assert abs(nu + 0.953) < 1e-3
