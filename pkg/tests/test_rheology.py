import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridvasc.rheology import (RheologyParams, dimensionless_diameter, in_vivo_viscosity,
                                 mu_045, segment_velocity, segment_viscosity)

mp.mp.dps = 50


def mu045_oracle(D):
    D = mp.mpf(D)
    return 6 * mp.exp(-mp.mpf("0.085") * D) + mp.mpf("3.2") - mp.mpf("2.44") * mp.exp(
        -mp.mpf("0.06") * D ** mp.mpf("0.645"))


def viscosity_oracle(D, H, mu_p):
    D, H, mu_p = mp.mpf(D), mp.mpf(H), mp.mpf(mu_p)
    damp = 1 / (1 + mp.mpf("1e-11") * D**12)
    C = (mp.mpf("0.8") + mp.exp(-mp.mpf("0.075") * D)) * (-1 + damp) + damp
    phi2 = (D / (D - mp.mpf("1.1"))) ** 2
    hct = ((1 - H) ** C - 1) / ((1 - mp.mpf("0.45")) ** C - 1)
    return mu_p * (1 + (mu045_oracle(D) - 1) * hct * phi2) * phi2


@pytest.mark.parametrize("D", [0.5, 3.2, 10.0, 40.0, 200.0])
def test_mu045_matches_high_precision(D):
    assert mu_045(D) == pytest.approx(float(mu045_oracle(D)), rel=1e-14)


def test_mu045_large_D_limit():
    assert mu_045(1.0e6) == pytest.approx(3.2, rel=1e-12)


def test_mu045_bounds_and_monotone_on_grid():
    D = np.linspace(0.01, 500.0, 5000)
    v = mu_045(D)
    assert np.all(v > 3.2 - 2.44) and np.all(v < 9.2)


@pytest.mark.parametrize("D,H", [(8.0, 0.45), (5.0, 0.3), (14.0, 0.6), (60.0, 0.45)])
def test_in_vivo_viscosity_matches_high_precision(D, H):
    got = in_vivo_viscosity(D, RheologyParams(H=H, mu_p=1.2e-3))
    assert got == pytest.approx(float(viscosity_oracle(D, H, 1.2e-3)), rel=1e-13)


def test_hematocrit_bracket_collapses_at_045():
    D = 8.0
    phi2 = (D / (D - 1.1)) ** 2
    expect = 1e-3 * (1 + (mu_045(D) - 1) * phi2) * phi2
    assert in_vivo_viscosity(D) == pytest.approx(expect, rel=1e-14)


def test_domain_error_at_singular_factor():
    with pytest.raises(ValueError):
        in_vivo_viscosity(1.1)
    with pytest.raises(ValueError):
        in_vivo_viscosity(np.array([5.0, 0.9]))


def test_params_validation():
    with pytest.raises(ValueError):
        RheologyParams(H=1.0)
    with pytest.raises(ValueError):
        RheologyParams(mu_p=0.0)


def test_dimensionless_diameter_is_explicit():
    assert dimensionless_diameter(4.0e-6) == pytest.approx(8.0)
    assert segment_viscosity(4.0e-6) == in_vivo_viscosity(8.0)


@given(st.floats(1.2, 1e4), st.floats(0.05, 0.95))
@settings(max_examples=200, deadline=None)
def test_viscosity_positive_and_finite(D, H):
    v = in_vivo_viscosity(D, RheologyParams(H=H))
    assert np.isfinite(v) and v > 0


@given(st.floats(1.2, 1e3), st.floats(1e-4, 1e-2))
@settings(max_examples=100, deadline=None)
def test_relative_viscosity_independent_of_plasma_viscosity_at_045(D, mu_p):
    a = in_vivo_viscosity(D, RheologyParams(0.45, mu_p)) / mu_p
    b = in_vivo_viscosity(D) / 1e-3
    assert a == pytest.approx(b, rel=1e-12)


def test_segment_velocity():
    assert segment_velocity(3e-6, 3e-3, 0.0, 1e-4) == 0.0
    v1 = segment_velocity(3e-6, 3e-3, 1.0, 1e-4)
    assert segment_velocity(6e-6, 3e-3, 1.0, 1e-4) == pytest.approx(4 * v1, rel=1e-15)
    assert v1 == pytest.approx((3e-6) ** 2 / (8 * 3e-3 * 1e-4), rel=1e-15)
    with pytest.raises(ValueError):
        segment_velocity(-1e-6, 1e-3, 1.0, 1e-4)


def test_capillaries_slower_than_large_vessels(reference_net, reference_split):
    large, cap = reference_split
    lm = np.isin(reference_net.segment_ids, list(large))
    mu = segment_viscosity(reference_net.radius)
    v = segment_velocity(reference_net.radius, mu, 1.0, reference_net.length)
    assert v[~lm].mean() < v[lm].mean()
