import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvqkd_arf.channel import (
    ETA_MAX,
    ClampStats,
    LinkGeometry,
    TurbulenceParams,
    aperture_fraction,
    beam_radius,
    bob_transmissivity,
    collection_fraction,
    eve_transmissivity,
    gg_cdf,
    gg_pdf,
    gg_quantile,
    gg_sample,
    make_rng,
    offset_cdf,
    offset_pdf,
    offset_sample,
    offset_scale,
    pointing_transmissivity,
    safe_fraction,
    safe_zone_transmissivity,
)
from cvqkd_arf.errors import DomainError, ValidationError
from cvqkd_arf.quadrature import QuadConfig, quad_semi_infinite

GEOM = LinkGeometry()
TP = TurbulenceParams()
TIGHT = QuadConfig(rel_tol=1e-10, abs_tol=1e-14)

# 30-digit mpmath evaluations of the closed forms at default geometry
W_500 = 0.050242834457960984
A0_REF = 0.90905888873862736
A_SAFE_COMPLEMENT = 4.7160544674936271e-9
GG_PDF_REF = [(1.0, 0.37300868107364927), (0.25, 0.86433817039710593), (4.0, 0.017972743861061114)]
GG_CDF_AT_1 = 0.65087635117991347

offsets = st.floats(min_value=0.0, max_value=0.5)


def test_geometry_defaults():
    assert GEOM.z_link == 500.0
    assert GEOM.aperture_radius == 0.05
    assert GEOM.safe_radius == 0.15
    assert GEOM.wavelength == 1550e-9
    assert GEOM.jitter_sigma == 50e-6
    assert TP.alpha == 4.2 and TP.beta_gg == 1.4


@pytest.mark.parametrize("field,value", [
    ("z_link", 0.0), ("aperture_radius", -1.0), ("waist", 0.0),
    ("wavelength", -1e-9), ("jitter_sigma", -1.0), ("jitter_sigma", 0.02),
    ("safe_radius", 0.01), ("rx_beam_radius", 0.0),
])
def test_geometry_validation(field, value):
    with pytest.raises(ValidationError):
        dataclasses.replace(GEOM, **{field: value})


def test_guard_ring_message():
    with pytest.raises(ValidationError, match="guard ring"):
        LinkGeometry(safe_radius=0.04)


def test_turbulence_validation():
    with pytest.raises(ValidationError):
        TurbulenceParams(alpha=0.0)
    with pytest.raises(ValidationError):
        TurbulenceParams(beta_gg=-1.0)


def test_beam_radius_reference():
    assert beam_radius(GEOM) == pytest.approx(W_500, rel=1e-14)


def test_beam_radius_short_link():
    assert beam_radius(LinkGeometry(z_link=1e-9)) == pytest.approx(0.05, rel=1e-15)


def test_beam_radius_increases_with_distance():
    w = [beam_radius(LinkGeometry(z_link=z)) for z in np.linspace(1.0, 5e4, 200)]
    assert all(b > a for a, b in zip(w, w[1:]))
    assert min(w) >= GEOM.waist


def test_beam_radius_override():
    assert beam_radius(GEOM.with_beam_radius(0.12)) == 0.12


def test_collection_fractions():
    assert aperture_fraction(GEOM) == pytest.approx(A0_REF, rel=1e-13)
    assert 1.0 - safe_fraction(GEOM) == pytest.approx(A_SAFE_COMPLEMENT, rel=1e-6)
    assert collection_fraction(0.05, 0.0502428) == pytest.approx(0.90905917528440956, rel=1e-13)
    assert 1.0 - collection_fraction(0.15, 0.0502428) < 1e-7
    assert collection_fraction(10.0, 0.01) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        collection_fraction(0.0, 0.05)


def test_transmissivity_references():
    w2 = W_500**2
    assert pointing_transmissivity(0.0, GEOM) == aperture_fraction(GEOM)
    assert pointing_transmissivity(w2 / 2.0, GEOM) == pytest.approx(A0_REF / math.e, rel=1e-13)
    assert pointing_transmissivity(6.25e-4, GEOM) == pytest.approx(0.55403696697653950, rel=1e-13)
    assert safe_zone_transmissivity(1.25e-3, GEOM) == pytest.approx(0.37144408662230908, rel=1e-13)
    assert eve_transmissivity(0.0, GEOM) < 1e-7
    assert eve_transmissivity(1e3, GEOM) == 1.0


def test_bob_transmissivity_reference():
    assert bob_transmissivity(2e-4, 1.3, GEOM, 0.8) == pytest.approx(0.80687880778197455, rel=1e-13)
    assert bob_transmissivity(0.0, 1.0, GEOM, 0.8) == pytest.approx(0.8 * A0_REF, rel=1e-14)
    assert 0.0 < bob_transmissivity(0.0, 1e-300, GEOM, 0.8) < 1e-299


def test_bob_transmissivity_clamps_and_counts():
    stats = ClampStats()
    eta = bob_transmissivity(np.zeros(4), np.array([0.5, 2.0, 5.0, 100.0]), GEOM, 0.8, stats)
    assert np.all(eta < 1.0)
    assert eta[-1] == ETA_MAX
    assert stats.count == 3


def test_bob_transmissivity_domain():
    with pytest.raises(DomainError):
        bob_transmissivity(-1.0, 1.0, GEOM, 0.8)
    with pytest.raises(DomainError):
        bob_transmissivity(0.0, 1.0, GEOM, 1.5)


# h <= 1 keeps eta_sys = 1 below the clamp (A0 < 1)
@given(offsets, st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=0.05, max_value=1.0))
def test_bob_transmissivity_linear_in_eta_sys(r, h, eta_sys):
    base = bob_transmissivity(r, h, GEOM, 1.0)
    assert bob_transmissivity(r, h, GEOM, eta_sys) == pytest.approx(eta_sys * base, rel=1e-15)


@given(offsets)
def test_safe_and_eve_partition_power(r):
    assert safe_zone_transmissivity(r, GEOM) + eve_transmissivity(r, GEOM) == 1.0
    assert pointing_transmissivity(r, GEOM) <= safe_zone_transmissivity(r, GEOM)


def test_transmissivity_monotonicity():
    r = np.linspace(0.0, 0.02, 100)
    assert np.all(np.diff(pointing_transmissivity(r, GEOM)) < 0)
    assert np.all(np.diff(eve_transmissivity(r, GEOM)) > 0)


@pytest.mark.parametrize("h,ref", GG_PDF_REF)
def test_gg_pdf_reference(h, ref):
    assert gg_pdf(h, TP) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("tp", [TP, TurbulenceParams(2.0, 2.0), TurbulenceParams(11.6, 10.1),
                                TurbulenceParams(0.8, 0.5), TurbulenceParams(500.0, 500.0)])
def test_gg_pdf_normalised_unit_mean(tp):
    mass, _ = quad_semi_infinite(lambda h: gg_pdf(h, tp), TIGHT, points=[1.0])
    mean, _ = quad_semi_infinite(lambda h: h * gg_pdf(h, tp), TIGHT, points=[1.0])
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert mean == pytest.approx(1.0, abs=1e-6)


def test_gg_pdf_domain():
    with pytest.raises(DomainError):
        gg_pdf(0.0, TP)


def test_gg_cdf_reference_and_order():
    h = np.array([4.0, 1.0, 0.25])
    cdf = gg_cdf(h, TP)
    assert cdf[1] == pytest.approx(GG_CDF_AT_1, abs=1e-10)
    assert cdf[2] < cdf[1] < cdf[0] < 1.0


def test_gg_quantile_tail():
    hq = gg_quantile(0.999, TP)
    assert gg_cdf(hq, TP)[0] == pytest.approx(0.999, abs=1e-9)


def test_gg_sample_mean_and_determinism():
    a = gg_sample(TP, make_rng(7), 1_000_000)
    b = gg_sample(TP, make_rng(7), 1_000_000)
    assert np.array_equal(a, b)
    stderr = a.std() / math.sqrt(a.size)
    assert abs(a.mean() - 1.0) < 3 * stderr


def test_gg_sample_ks_distance():
    n = 1_000_000
    x = np.sort(gg_sample(TP, make_rng(11), n))
    # evaluate the CDF on a quantile grid and bound the KS distance between nodes
    probe = x[np.linspace(0, n - 1, 2001).astype(int)]
    cdf = gg_cdf(probe, TP)
    idx = np.searchsorted(x, probe, side="right")
    ks = np.max(np.abs(cdf - idx / n))
    # the step between probes adds at most 1/2000 to the distance
    assert ks + 1.0 / 2000 < 0.002


def test_offset_pdf_reference():
    assert offset_pdf(0.0, GEOM) == pytest.approx(800.0, rel=1e-14)
    assert offset_scale(GEOM) == pytest.approx(1.25e-3, rel=1e-14)
    mass, _ = quad_semi_infinite(lambda r: offset_pdf(r, GEOM), TIGHT, points=[1.25e-3])
    assert mass == pytest.approx(1.0, abs=1e-9)


def test_offset_sample_mean_ks_and_determinism():
    n = 1_000_000
    r = offset_sample(GEOM, make_rng(3), n)
    assert np.array_equal(r, offset_sample(GEOM, make_rng(3), n))
    assert abs(r.mean() - 1.25e-3) < 3 * r.std() / math.sqrt(n)
    x = np.sort(r)
    cdf = offset_cdf(x, GEOM)
    ecdf_hi = np.arange(1, n + 1) / n
    ks = max(np.max(ecdf_hi - cdf), np.max(cdf - (ecdf_hi - 1.0 / n)))
    assert ks < 0.002


def test_make_rng_strands_differ():
    assert make_rng(5, 0).random() != make_rng(5, 1).random()
    assert make_rng(5, 1).random() == make_rng(6, 0).random()
