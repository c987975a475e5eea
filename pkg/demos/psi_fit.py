"""Polynomial fit of the profile kernel Psi on a Raman-pumped span.

Shows the fit residual against the polynomial degree and compares the
closed-form span integral with direct quadrature of the sampled profile.

    python3 demos/psi_fit.py
"""
import numpy as np

from lf_engine import (FiberSpan, FitConfig, SpectralComponent, WdmGrid, enumerate_islands, fit_psi,
                       island_points, propagate_link, psi, silica_raman_gain, span_integral_oracle,
                       span_integral_poly, theta_exponent)

ALPHA = 2.303e-5
grid = WdmGrid(193.1e12 + 50e9 * np.arange(-2, 3), 32e9, 1e-3, cut_index=2)
span = FiberSpan(80e3, 1.3e-3, ALPHA, -21.7e-27, 1.4e-40, 193.1e12, raman_gain=silica_raman_gain(),
                 pumps=(SpectralComponent(206.3e12, 0.4, 2.8e-5, kind="pump"),))
link = propagate_link([span], ["transparent"], grid, dz=10.0)
island = [x for x in enumerate_islands(grid) if x.channels == (0, 3, 1, 2)][0]

z = link.profiles[0].z_m
print(f"island {island.channels}: Psi ranges {psi(link, 0, z, *island.representative).min():.4f}"
      f" .. {psi(link, 0, z, *island.representative).max():.4f}")
for n in (2, 4, 6, 8, 10):
    fit = fit_psi(link, 0, island, FitConfig(n_psi=n))
    print(f"  N_psi = {n:2d}: weighted RMS residual {fit.residual:.3e}, normal-matrix condition {fit.condition:.1e}")

fit = fit_psi(link, 0, island)
rng = np.random.default_rng(0)
f1, f2, f3, _ = island_points(grid, island, rng, 5)
print("\n  f1 [THz]    f2 [THz]    f3 [THz]    |I| [km]   rel. dev. vs quadrature")
for a, b, c in zip(f1, f2, f3):
    got = span_integral_poly(fit, theta_exponent(link, 0, a, b, c))
    ref = span_integral_oracle(link, 0, a, b, c)
    print(f"  {a / 1e12:.5f}   {b / 1e12:.5f}   {c / 1e12:.5f}   {abs(got) / 1e3:8.4f}   {abs(got - ref) / abs(ref):.2e}")
