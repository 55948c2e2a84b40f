import math

import numpy as np
import pytest

from diropt import ConvergenceError, DomainError, GaussMarkovParams, ValidationError
from diropt.gauss import ba_gaussian_oracle, gauss_curve, gauss_rate


def test_rate_zero_at_innovation_variance():
    assert gauss_rate(GaussMarkovParams(1.0, 0.9, D=0.19)) == pytest.approx(0.0, abs=1e-15)


def test_one_bit_at_quarter_innovation():
    assert gauss_rate(GaussMarkovParams(1.0, 0.9, D=0.0475)) == pytest.approx(1.0, abs=1e-12)


def test_a_rescales_distortion_and_b_is_inert():
    base = gauss_rate(GaussMarkovParams(2.0, 0.5, a=1, D=0.1 / 4))
    assert gauss_rate(GaussMarkovParams(2.0, 0.5, a=2, b=3.7, D=0.1)) == pytest.approx(base, abs=1e-15)


def test_clamped_and_flagged():
    p = GaussMarkovParams(1.0, 0.5, D=5.0)
    assert p.clamped and gauss_rate(p) == 0.0
    assert not GaussMarkovParams(1.0, 0.5, D=0.1).clamped


def test_parameter_validation():
    with pytest.raises(DomainError):
        GaussMarkovParams(1.0, 0.5, D=0.0)
    with pytest.raises(ValidationError):
        GaussMarkovParams(1.0, 1.0)
    with pytest.raises(ValidationError):
        GaussMarkovParams(-1.0, 0.0)
    with pytest.raises(ValidationError):
        GaussMarkovParams(1.0, 0.0, a=0.0)


def test_monotonicity_grid():
    Ds = np.linspace(0.01, 0.5, 12)
    rates = [gauss_rate(GaussMarkovParams(1.0, 0.5, D=D)) for D in Ds]
    assert all(b <= a for a, b in zip(rates, rates[1:]))
    assert (gauss_rate(GaussMarkovParams(1.0, 0.5, a=2, D=0.1))
            > gauss_rate(GaussMarkovParams(1.0, 0.5, a=1, D=0.1)))
    assert (gauss_rate(GaussMarkovParams(2.0, 0.5, D=0.1))
            > gauss_rate(GaussMarkovParams(1.0, 0.5, D=0.1)))
    assert (gauss_rate(GaussMarkovParams(1.0, 0.9, D=0.1))
            < gauss_rate(GaussMarkovParams(1.0, 0.5, D=0.1)))
    assert all(gauss_rate(GaussMarkovParams(1.0, r, D=D)) >= 0 for r in (-0.9, 0, 0.9) for D in Ds)


def test_oracle_quarter_variance():
    assert ba_gaussian_oracle(1.0, 0.25) == pytest.approx(1.0, abs=0.02)


def test_oracle_above_variance_is_zero():
    assert ba_gaussian_oracle(1.0, 1.0) <= 0.01
    assert ba_gaussian_oracle(1.0, 1.5) == 0.0


def test_oracle_halving_distortion_adds_half_bit():
    assert ba_gaussian_oracle(1.0, 0.1) - ba_gaussian_oracle(1.0, 0.2) == pytest.approx(0.5, abs=0.02)


def test_oracle_b_independent_agreement():
    for b in (0.0, 1.5):
        p = GaussMarkovParams(1.0, 0.5, b=b, D=0.3)
        assert abs(gauss_rate(p) - ba_gaussian_oracle(p.innovation_variance, p.D)) <= 0.02


def test_oracle_rejects_coarse_setups():
    with pytest.raises(ValidationError):
        ba_gaussian_oracle(1.0, 0.2, grid=128)
    with pytest.raises(ValidationError):
        ba_gaussian_oracle(1.0, 0.2, half_width=3.0)


def test_oracle_reports_non_convergence():
    with pytest.raises(ConvergenceError):
        ba_gaussian_oracle(1.0, 0.01, iterations=2, tol=1e-15)


def test_curve_rows():
    rows = gauss_curve(GaussMarkovParams(1.0, 0.0), [0.25, 0.5], oracle=True)
    assert [len(r) for r in rows] == [3, 3]
    assert rows[0][1] == pytest.approx(1.0)
    assert rows[1][2] == pytest.approx(0.5, abs=0.02)
    assert gauss_curve(GaussMarkovParams(1.0, 0.0), [0.25]) == [(0.25, 1.0)]
    assert math.isclose(rows[0][2], 1.0, abs_tol=0.02)
