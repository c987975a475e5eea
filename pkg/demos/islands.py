"""Integration islands of the GN double integral for a non-uniform 4-channel grid.

    python3 demos/islands.py
"""
import sys

from lf_engine import WdmGrid, enumerate_islands, islands_to_csv

grid = WdmGrid([193.00e12, 193.05e12, 193.1125e12, 193.2e12], [32e9, 32e9, 64e9, 32e9], 1e-3)
for cut in range(grid.n_channels):
    isl = enumerate_islands(grid, cut)
    print(f"CUT {cut}: {len(isl)} islands, e.g. {[x.channels[:3] for x in isl[:6]]}")
print()
islands_to_csv(enumerate_islands(grid, 2), sys.stdout)
