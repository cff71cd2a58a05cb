"""One test per acceptance criterion; the summary table lists each as PASS or FAIL.

Criteria 4 to 9 use a model calibrated in this session (budget 5000).
"""

import math
import time

import numpy as np
import pytest

from pulsejet import scenarios
from pulsejet.calibrate import PARAMS, CalibrationBase, apply_params, evaluate, fit

BUDGET = 5000


@pytest.fixture(scope="session")
def base():
    return CalibrationBase()


@pytest.fixture(scope="session")
def published_fit(base):
    t0 = time.perf_counter()
    result = fit(scenarios.published_targets(), base, budget=BUDGET)
    result.seconds = time.perf_counter() - t0
    return result


@pytest.fixture(scope="session")
def fitted(published_fit, base):
    return apply_params(published_fit.params, CalibrationBase(params=base.params, dt=1e-3))


def check(c, report_criterion):
    report_criterion(c)
    assert c.passed, c.line()


def test_criterion_01_formula_exactness(report_criterion):
    check(scenarios.check_formulas(), report_criterion)


def test_criterion_02_geometry_endpoints(report_criterion):
    check(scenarios.check_geometry(), report_criterion)


def test_criterion_03_terminal_fall_closure(report_criterion, fitted):
    check(scenarios.check_fall_closure(fitted), report_criterion)


def test_criterion_04_calibrated_evr_sweep(report_criterion, published_fit, base):
    t0 = time.perf_counter()
    c = scenarios.check_evr_sweep(published_fit, base, BUDGET)
    # coarse grid cross-check: no grid point beats the converged fit
    names = ("V_tot", "A_nozzle", "cda_scale", "cda_mantle_fraction")
    specs = {s.name: s for s in PARAMS}
    axis = np.linspace(0, 1, 5)
    best = math.inf
    for u in np.stack(np.meshgrid(*[axis] * 4, indexing="ij"), -1).reshape(-1, 4):
        vals = dict(published_fit.params)
        vals.update({n: specs[n].from_unit(x) for n, x in zip(names, u)})
        best = min(best, evaluate(vals, scenarios.published_targets(), base)[0])
    c.passed &= published_fit.loss <= best and published_fit.evaluations <= BUDGET
    c.detail += f"; fit loss {published_fit.loss:.4f} <= 5^4 grid best {best:.4f}"
    c.seconds = published_fit.seconds + time.perf_counter() - t0
    check(c, report_criterion)


def test_criterion_05_gpf_tradeoff(report_criterion, fitted):
    check(scenarios.check_gpf_tradeoff(fitted), report_criterion)


def test_criterion_06_valve_comparison(report_criterion, fitted):
    check(scenarios.check_valves(fitted), report_criterion)


def test_criterion_07_multicycle_ordering(report_criterion, fitted):
    check(scenarios.check_multicycle(fitted), report_criterion)


def test_criterion_08_asymptotic_cot(report_criterion, fitted):
    check(scenarios.check_asymptotic_cot(fitted), report_criterion)


def test_criterion_09_numerical_hygiene(report_criterion, fitted):
    check(scenarios.check_numerics(fitted), report_criterion)


def test_criterion_10_analysis_oracle(report_criterion):
    check(scenarios.check_analysis(), report_criterion)
