"""A small Monte Carlo sweep over transmit SNR.

This is the experiment behind the SNR figure, cut down to 20 trials so it
finishes in about half a minute. The full version is

    maxmin-multicast sweep-snr --trials 100 --out snr.csv

which also writes a matplotlib script next to the CSV.

Run with ``python demos/03_snr_sweep.py [output.csv]``.
"""
import sys
from pathlib import Path

from maxmin_multicast.experiments import SweepSettings, summarize, sweep_snr, write_csv, write_plot_script

settings = SweepSettings(n_trials=20)
records = sweep_snr((0, 5, 10, 15, 20), settings)

print(" snr  kind   relaxed  achieved    gap")
for s in summarize(records, "snr_db"):
    print(f"{s.point:4g}  {s.kind.value:4}  {s.mean_t_relaxed:8.3f}  {s.mean_t_achieved:8.3f}  {s.mean_gap:.4f}")

# The per-antenna curve sits below the sum-power curve: splitting the same
# total evenly over the antennas removes freedom. Its gap to the relaxed bound
# is also larger, because more constraints make rank-one optima rarer.
if len(sys.argv) > 1:
    out = Path(sys.argv[1])
    write_csv(records, out)
    print("wrote", out, "and", write_plot_script(out, "snr_db"))
