import numpy as np
import pytest

from randpde.errors import ParameterError, ResolutionWarning
from randpde.perforations import NoPerforations, build_perforations
from randpde.poisson import reference_solve


def f_one(x, y):
    return np.ones_like(x)


def unit_square_poisson_series(x, y, terms=199):
    """Independent oracle: double-sine series for -lap(u) = 1, u = 0 on the
    boundary of the unit square, truncated at odd mode `terms`."""
    total = np.zeros(np.broadcast(x, y).shape)
    for mm in range(1, terms + 1, 2):
        for nn in range(1, terms + 1, 2):
            coef = 16.0 / (np.pi ** 4 * mm * nn * (mm * mm + nn * nn))
            total += coef * np.sin(mm * np.pi * x) * np.sin(nn * np.pi * y)
    return total


def test_series_oracle_center_value():
    center = float(unit_square_poisson_series(0.5, 0.5))
    assert center == pytest.approx(0.0736713, abs=2e-7)


def test_reference_matches_series_at_center():
    ref = reference_solve(NoPerforations(), f_one, 256)
    oracle = float(unit_square_poisson_series(0.5, 0.5))
    assert abs(ref.value_at_center() - oracle) / oracle <= 1e-3


def test_reference_matches_series_everywhere():
    ref = reference_solve(NoPerforations(), f_one, 128)
    xs = np.linspace(0, 1, 129)
    exact = unit_square_poisson_series(xs[:, None], xs[None, :])
    assert np.max(np.abs(ref.values - exact)) <= 2e-4 * np.max(exact)


def test_penalization_contract_inside_perforations():
    perf = build_perforations("periodic_discs", epsilon=0.25, radius_factor=0.2)
    ref = reference_solve(perf, f_one, 128)
    assert ref.max_inside_perforations() <= 1e-4 * np.abs(ref.values).max()


def test_h1_norm_scales_like_epsilon():
    # halving the period roughly halves the solution's H1 size
    norms = {}
    for eps in (0.1, 0.05):
        perf = build_perforations("periodic_discs", epsilon=eps, radius_factor=0.2)
        ref = reference_solve(perf, f_one, 256)
        norms[eps] = ref.h1_seminorm()
    ratio = norms[0.1] / norms[0.05]
    assert 1.4 <= ratio <= 2.6


def test_resolution_warning_and_strict_mode():
    perf = build_perforations("periodic_discs", epsilon=0.03, radius_factor=0.35)
    with pytest.warns(ResolutionWarning):
        reference_solve(perf, f_one, 64)
    with pytest.raises(ParameterError):
        reference_solve(perf, f_one, 64, strict=True)


def test_boundary_values_are_zero():
    ref = reference_solve(NoPerforations(), f_one, 64)
    assert np.all(ref.values[0, :] == 0)
    assert np.all(ref.values[-1, :] == 0)
    assert np.all(ref.values[:, 0] == 0)
    assert np.all(ref.values[:, -1] == 0)
