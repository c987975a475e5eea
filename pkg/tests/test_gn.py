import math

import numpy as np
import pytest

from lf_engine import (ContractError, DomainError, QuadConfig, QuadratureToleranceError, enumerate_islands,
                       evaluate_channel, fit_islands, gn_nli_power, gn_nli_psd, gn_psd_breakdown, gn_report,
                       link_function, propagate_link)
from lf_engine.gn import GN_PREFACTOR

from _scenarios import comb, pumped_fits_5ch, pumped_link_5ch, smf


@pytest.fixture(scope="module")
def sci_link():
    return propagate_link([smf()], ["transparent"], comb(1), dz=10.0)


def mesh_psd(link, cut, fits, f, n=400):
    """Midpoint Riemann sum of the GN integrand over the full (f1, f2) square
    spanned by the grid, with the support taken from band membership."""
    grid = link.grid
    lo, hi = grid.band_edges
    a, b = lo.min(), hi.max()
    x = a + (np.arange(n) + 0.5) * (b - a) / n
    f1, f2 = (v.ravel() for v in np.meshgrid(x, x, indexing="ij"))
    f3 = f1 + f2 - f
    c = [grid.channel_of(v, strict=False) for v in (f1, f2, f3)]
    ok = (c[0] >= 0) & (c[1] >= 0) & (c[2] >= 0)
    psd = grid.psd_w_per_hz
    g = psd[c[0][ok]] * psd[c[1][ok]] * psd[c[2][ok]]
    lk = link_function(link, f1[ok], f2[ok], f3[ok], fits)
    return GN_PREFACTOR * np.sum(g * np.abs(lk) ** 2) * ((b - a) / n) ** 2


def test_sci_matches_mesh(sci_link):
    islands = enumerate_islands(sci_link.grid, 0)
    fits = fit_islands(sci_link, islands)
    f = sci_link.grid.center_frequencies_hz[0]
    got = gn_nli_psd(sci_link, f, islands, fits)
    assert abs(got - mesh_psd(sci_link, 0, fits, f)) / got < 1e-2


def test_zero_power_gives_zero(sci_link):
    link = sci_link.with_grid(sci_link.grid.scaled(0.0))
    assert gn_nli_power(link, 0) == 0.0
    assert gn_nli_power(link, 0, kernel="closed_form") == 0.0


@pytest.mark.parametrize("kappa", [2.0, 0.37])
def test_cubic_scaling(kappa):
    link = pumped_link_5ch()
    islands, fits = pumped_fits_5ch()
    base = evaluate_channel(link, 2, islands, fits)
    scaled = evaluate_channel(link.with_grid(link.grid.scaled(kappa)), 2, islands, fits)
    assert scaled.power_w == pytest.approx(kappa ** 3 * base.power_w, rel=4 * np.finfo(float).eps)
    if kappa == 2.0:
        assert scaled.power_w == 8 * base.power_w


def test_island_additivity_and_non_negativity():
    link = pumped_link_5ch()
    islands, fits = pumped_fits_5ch()
    f = link.grid.center_frequencies_hz[2] + 3e9
    total, parts = gn_psd_breakdown(link, f, islands, fits)
    assert total == math.fsum(p.psd_w_per_hz for p in parts)
    assert all(p.psd_w_per_hz >= 0 for p in parts)
    assert [p.key for p in parts] == [isl.channels for isl in islands]


def test_threads_do_not_change_result():
    link = pumped_link_5ch()
    islands, fits = pumped_fits_5ch()
    f = link.grid.center_frequencies_hz[2]
    assert gn_nli_psd(link, f, islands, fits, workers=4) == gn_nli_psd(link, f, islands, fits)


def test_poly_and_closed_form_agree_raman_free():
    link = propagate_link([smf()] * 2, ["transparent"] * 2, comb(3, cut=1), dz=10.0)
    a = gn_nli_power(link, 1)
    b = gn_nli_power(link, 1, kernel="closed_form")
    assert abs(a - b) / b < 1e-6


def test_coherent_accumulation_bound():
    p = {n: gn_nli_power(propagate_link([smf()] * n, ["transparent"] * n, comb(1), dz=100.0), 0)
         for n in (1, 2, 4)}
    for n in (1, 2):
        assert 2.0 <= p[2 * n] / p[n] <= 4.0
    assert 4.0 <= p[4] / p[1] <= 16.0


def test_band_points_trapezoid(sci_link):
    one = evaluate_channel(sci_link, 0)
    five = evaluate_channel(sci_link, 0, quad=QuadConfig(band_points=5))
    assert five.sample_psd_w_per_hz.size == 5 and five.sample_psd_w_per_hz[2] == one.psd_w_per_hz
    # the SCI PSD peaks at the centre, so the band average is lower than the centre value
    assert 0.5 * one.power_w < five.power_w < one.power_w


def test_quadrature_failure_carries_diagnostics():
    link = pumped_link_5ch()
    islands, fits = pumped_fits_5ch()
    with pytest.raises(QuadratureToleranceError) as info:
        gn_nli_psd(link, link.grid.center_frequencies_hz[2], islands, fits,
                   QuadConfig(order=2, max_order=4, tol=1e-12))
    exc = info.value
    assert exc.order == 4 and exc.error > 0 and exc.estimate > 0
    assert "island" in str(exc)


def test_input_contracts():
    link = pumped_link_5ch()
    islands, fits = pumped_fits_5ch()
    fc = link.grid.center_frequencies_hz
    with pytest.raises(ContractError):
        gn_nli_psd(link, fc[2], islands, None)
    with pytest.raises(ContractError):
        gn_nli_psd(link, fc[2], islands, fits, kernel="mesh")
    with pytest.raises(DomainError):
        gn_nli_psd(link, fc[3], islands, fits)
    with pytest.raises(ContractError):
        gn_nli_psd(link, fc[2], islands + enumerate_islands(link.grid, 1), fits)
    with pytest.raises(ContractError):
        gn_nli_psd(link, fc[2], islands, {})
    for kw in (dict(order=0), dict(order=32, max_order=16), dict(tol=0.0), dict(band_points=0)):
        with pytest.raises(ContractError):
            QuadConfig(**kw)


def test_report_outputs(tmp_path):
    link = propagate_link([smf()], ["transparent"], comb(3, cut=1), dz=50.0)
    rep = gn_report(link)
    assert [c.cut for c in rep.channels] == [0, 1, 2]
    assert np.all(rep.power_w > 0)
    np.testing.assert_allclose(rep.power_w, rep.psd_w_per_hz * 32e9, rtol=1e-15)
    rep.to_csv(tmp_path / "r.csv")
    rep.islands_to_csv(tmp_path / "i.csv")
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0].startswith("cut,center_frequency_hz,symbol_rate_baud,nli_psd_w_per_hz,nli_power_w")
    assert len(rows) == 4
    n_isl = sum(c.n_islands for c in rep.channels)
    assert len((tmp_path / "i.csv").read_text().splitlines()) == 1 + n_isl
    text = rep.summary()
    assert "P_NLI [dBm]" in text and len(text.splitlines()) == 3 + 3
    # the centre channel sees the most interference
    assert rep.power_w[1] > rep.power_w[0] and rep.power_w[1] > rep.power_w[2]
    # outer channels of a symmetric comb mirror each other up to the beta3 slope
    assert rep.power_w[0] == pytest.approx(rep.power_w[2], rel=1e-2)
