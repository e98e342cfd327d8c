import numpy as np
import pytest

from randpde.defects import defect_coefficients
from randpde.errors import ComparabilityError, DegenerateControlWarning, ParameterError
from randpde.estimators import (antithetic_estimate, compare_strategies,
                                control_variate_estimate, mc_estimate,
                                sqs_estimate, write_reports_csv)
from randpde.fields import Checkerboard, PerturbedPeriodic
from randpde.sqs import sqs_auxiliary

ID = np.eye(2)


def test_constant_law_mean_exact_and_zero_variance():
    law = Checkerboard(5.0, 5.0)
    rep = mc_estimate(law, n=3, r=2, m=4, seed=0)
    assert np.max(np.abs(rep.mean - 5 * ID)) <= 1e-10
    assert np.max(rep.var) <= 1e-20
    assert rep.solves == 8


def test_antithetic_constant_law_matches_mc():
    law = Checkerboard(5.0, 5.0)
    mc = mc_estimate(law, n=3, r=2, m=4, seed=0)
    av = antithetic_estimate(law, n=3, r=2, m_pairs=4, seed=0)
    assert np.allclose(av.mean, mc.mean, atol=1e-12)
    assert np.max(av.var) <= 1e-20
    assert av.solves == 16


def test_mc_report_is_deterministic():
    law = Checkerboard(3.0, 20.0)
    a = mc_estimate(law, n=4, r=2, m=6, seed=99)
    b = mc_estimate(law, n=4, r=2, m=6, seed=99)
    assert np.array_equal(a.mean, b.mean)
    assert np.array_equal(a.var, b.var)
    assert a.ci95[0, 0] == pytest.approx(1.96 * np.sqrt(a.var[0, 0] / a.m), rel=1e-12)


def test_antithetic_unbiased_against_mc():
    law = Checkerboard(3.0, 20.0)
    mc = mc_estimate(law, n=6, r=4, m=100, seed=7)
    av = antithetic_estimate(law, n=6, r=4, m_pairs=50, seed=7)
    for (i, j) in ((0, 0), (1, 1)):
        assert abs(av.mean[i, j] - mc.mean[i, j]) <= av.ci95[i, j] + mc.ci95[i, j]


def test_antithetic_reduces_variance():
    law = Checkerboard(3.0, 20.0)
    mc = mc_estimate(law, n=6, r=4, m=120, seed=3)
    av = antithetic_estimate(law, n=6, r=4, m_pairs=60, seed=3)
    # equal-cost gain on the 11 entry should be well above 1
    gain = mc.var[0, 0] / (2 * av.var[0, 0])
    assert gain > 1.5


def test_degenerate_control_falls_back_to_mc():
    law = PerturbedPeriodic(a_per=3 * ID, c_per=0 * ID, eta=0.5)
    defects = defect_coefficients(law, n=4, r=2)
    mc = mc_estimate(law, n=4, r=2, m=8, seed=5)
    with pytest.warns(DegenerateControlWarning):
        cv = control_variate_estimate(law, n=4, r=2, m=8, order=1, seed=5,
                                      defects=defects)
    assert cv.degenerate_control
    assert np.array_equal(cv.mean, mc.mean)
    assert np.array_equal(cv.var, mc.var)


def test_control_variate_reduces_variance_order1():
    law = PerturbedPeriodic(a_per=3 * ID, c_per=17 * ID, eta=0.5)
    defects = defect_coefficients(law, n=6, r=4)
    mc = mc_estimate(law, n=6, r=4, m=80, seed=11)
    cv = control_variate_estimate(law, n=6, r=4, m=80, order=1, seed=11,
                                  defects=defects)
    assert cv.var[0, 0] < mc.var[0, 0]
    assert abs(cv.mean[0, 0] - mc.mean[0, 0]) <= cv.ci95[0, 0] + mc.ci95[0, 0]
    assert len(cv.rho) == 1


def test_control_variate_order2_beats_order1():
    law = PerturbedPeriodic(a_per=3 * ID, c_per=17 * ID, eta=0.5)
    defects = defect_coefficients(law, n=6, r=4, order=2)
    cv1 = control_variate_estimate(law, n=6, r=4, m=80, order=1, seed=11,
                                   defects=defects)
    cv2 = control_variate_estimate(law, n=6, r=4, m=80, order=2, seed=11,
                                   defects=defects)
    assert cv2.var[0, 0] < cv1.var[0, 0]
    assert len(cv2.rho) == 2


def test_sqs_ranked_equals_exact_without_selection_pressure():
    law = Checkerboard(3.0, 20.0)
    aux = sqs_auxiliary(11.5 * ID, 17.0 * ID, n=4, r=2, n_big=8)
    exact = sqs_estimate(law, n=4, r=2, m_keep=6, seed=2, mode="exact1")
    ranked = sqs_estimate(law, n=4, r=2, m_keep=6, seed=2, mode="ranked2",
                          pool=6, aux=aux)
    assert np.array_equal(exact.mean, ranked.mean)
    assert np.array_equal(exact.var, ranked.var)
    assert exact.rejected == 0
    assert ranked.rejected == 0


def test_sqs_exact_reduces_variance():
    law = Checkerboard(3.0, 20.0)
    mc = mc_estimate(law, n=6, r=4, m=80, seed=23)
    s1 = sqs_estimate(law, n=6, r=4, m_keep=80, seed=23, mode="exact1")
    assert s1.var[0, 0] < mc.var[0, 0]


def test_sqs_ranked_selection_reports_rejections():
    law = Checkerboard(3.0, 20.0)
    aux = sqs_auxiliary(11.5 * ID, 17.0 * ID, n=4, r=2, n_big=8)
    rep = sqs_estimate(law, n=4, r=2, m_keep=5, seed=2, mode="ranked2",
                       pool=40, aux=aux)
    assert rep.rejected == 35
    assert rep.m == 5
    assert rep.solves == 10


def test_compare_single_mc_factor_one():
    law = Checkerboard(3.0, 20.0)
    mc = mc_estimate(law, n=4, r=2, m=20, seed=1)
    table = compare_strategies([mc])
    row = table.row("mc", "11")
    assert row["factor_equal_cost"] == pytest.approx(1.0)
    assert row["factor_realized"] == pytest.approx(1.0)


def test_compare_rejects_mismatched_reports():
    law = Checkerboard(3.0, 20.0)
    a = mc_estimate(law, n=4, r=2, m=10, seed=1)
    b = mc_estimate(law, n=5, r=2, m=10, seed=1)
    with pytest.raises(ComparabilityError):
        compare_strategies([a, b])
    with pytest.raises(ComparabilityError):
        compare_strategies([antithetic_estimate(law, n=4, r=2, m_pairs=5, seed=1)])


def test_compare_doubled_m_realized_factor_two():
    # variance of the mean scales like 1/m
    law = Checkerboard(3.0, 20.0)
    base = mc_estimate(law, n=4, r=2, m=200, seed=40)
    double = mc_estimate(law, n=4, r=2, m=400, seed=41)
    table = compare_strategies([base, double])
    realized = [row["factor_realized"] for row in table.rows
                if row["entry"] == "11" and row is not table.rows[0]]
    assert realized[-1] == pytest.approx(2.0, rel=0.3)


def test_equal_cost_factor_accounts_for_pair_cost():
    law = Checkerboard(3.0, 20.0)
    mc = mc_estimate(law, n=6, r=2, m=100, seed=9)
    av = antithetic_estimate(law, n=6, r=2, m_pairs=50, seed=9)
    table = compare_strategies([mc, av])
    row = table.row("antithetic", "11")
    expected = (mc.var[0, 0] * 2) / (av.var[0, 0] * 4)
    assert row["factor_equal_cost"] == pytest.approx(expected, rel=1e-12)


def test_reports_csv_schema(tmp_path):
    law = Checkerboard(3.0, 20.0)
    mc = mc_estimate(law, n=4, r=2, m=10, seed=1)
    av = antithetic_estimate(law, n=4, r=2, m_pairs=5, seed=1)
    path = tmp_path / "reports.csv"
    write_reports_csv([mc, av], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "strategy,n,r,m,entry,mean,var,ci95,solves,rejected,rho"
    assert len(lines) == 1 + 2 * 3
    first = lines[1].split(",")
    assert first[0] == "mc" and first[4] == "11"
    assert float(first[5]) == pytest.approx(mc.mean[0, 0])


def test_parameter_validation():
    law = Checkerboard(3.0, 20.0)
    with pytest.raises(ParameterError):
        mc_estimate(law, n=4, r=2, m=1, seed=0)
    with pytest.raises(ParameterError):
        sqs_estimate(law, n=4, r=2, m_keep=4, seed=0, mode="ranked2", pool=2)
    with pytest.raises(ParameterError):
        control_variate_estimate(law, n=4, r=2, m=4, order=1, seed=0, defects=None)
