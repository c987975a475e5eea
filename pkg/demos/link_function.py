"""|LK|^2 along the f1 = f2 diagonal through the CUT for 1, 2 and 4 transparent spans,
with and without a forward Raman pump.  Writes a plot-ready CSV.

    python3 demos/link_function.py [out.csv]
"""
import csv
import sys

import numpy as np

from lf_engine import (FiberSpan, SpectralComponent, WdmGrid, enumerate_islands, fit_islands, link_function,
                       propagate_link, silica_raman_gain)

ALPHA = 2.303e-5
grid = WdmGrid([193.1e12], 64e9, 1e-3)
pump = SpectralComponent(206.3e12, 0.4, 2.8e-5, kind="pump")
f = grid.center_frequencies_hz[0]
df = np.linspace(-15.5e9, 15.5e9, 125)   # f3 = f + 2 df stays inside the 64 GHz band
cols = {"df_hz": df}
for pumped in (False, True):
    span = FiberSpan(80e3, 1.3e-3, ALPHA, -21.7e-27, 1.4e-40, 193.1e12,
                     raman_gain=silica_raman_gain() if pumped else None, pumps=(pump,) if pumped else ())
    for n in (1, 2, 4):
        link = propagate_link([span] * n, ["transparent"] * n, grid, dz=20.0)
        fits = fit_islands(link, enumerate_islands(grid))
        # f1 = f2 = f + df, f3 = f + 2 df keeps f1 + f2 - f3 = f
        lk = link_function(link, f + df, f + df, f + 2 * df, fits)
        cols[f"lk2_{'pumped' if pumped else 'plain'}_{n}span"] = np.abs(lk) ** 2
        print(f"{'pumped' if pumped else 'plain ':>6}, {n} span(s): |LK|^2 at df = 0 is "
              f"{np.abs(link_function(link, f, f, f, fits)) ** 2:.4e} 1/W^2")

path = sys.argv[1] if len(sys.argv) > 1 else "link_function.csv"
with open(path, "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(cols)
    w.writerows(zip(*cols.values()))
print(f"wrote {path}")
