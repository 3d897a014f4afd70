"""RMSE against gradient noise for SG and forward-difference operators.

A reduced version of the acceptance sweep (64x64, 2 trials).

Run: python3 demos/noise_sweep.py [plot.png]
"""
import sys

from sgrecon.synth import noise_sweep, peaks_surface, plot_sweep, sweep_summary

sigmas = [0.02, 0.05, 0.1, 0.2]
rows = noise_sweep(peaks_surface(64, 64), sigmas, ["sg", "fw"], trials=2, seed=0)
summary = sweep_summary(rows)
print("sigma      sg        fw")
for s in sigmas:
    print(f"{s:5.2f}  {summary[('sg', s)]:.4f}    {summary[('fw', s)]:.4f}")
if len(sys.argv) > 1:
    plot_sweep(rows, sys.argv[1])
    print("plot written to", sys.argv[1])
