"""
Comparing relay schemes
=======================

A small Monte Carlo sweep over the source power.  Every scheme sees the
same channel draws, so differences between columns are paired.  Raise
``REALIZATIONS`` (and set FDRELAY_WORKERS) for smoother curves.
"""

# %%
import numpy as np

from fdrelay import SweepSpec, SystemConfig, run_sweep

REALIZATIONS = 20
schemes = ("fd_nonuniform", "fd_no_si_harvest", "fd_csir", "half_duplex")
spec = SweepSpec(SystemConfig(ns=2, nr=8, nd=2), "ps_dbm", (25.0, 35.0, 45.0), schemes,
                 realizations=REALIZATIONS, seed=1)
result = run_sweep(spec)

# %%
print("P_s dBm  " + "  ".join(f"{s:>16s}" for s in schemes))
for v in spec.values:
    recs = {r.scheme: r for r in result.records if r.axis_value == v}
    print(f"{v:7.1f}  " + "  ".join(f"{recs[s].mean_rate:8.3f} +-{recs[s].rate_std_error:5.3f}"
                                     for s in schemes))

# %%
# Full-duplex gain over half duplex, and what full CSI buys over CSIR
for v in spec.values:
    recs = {r.scheme: r.mean_rate for r in result.records if r.axis_value == v}
    print(f"{v:5.1f} dBm  FD/HD {recs['fd_nonuniform'] / recs['half_duplex']:.3f}  "
          f"CSI gain {100 * (recs['fd_nonuniform'] / recs['fd_csir'] - 1):6.2f}%")

# %%
# Share of draws where the relay cannot power its cancellation circuit
zeros = np.array([[r.zero_rate_fraction for r in result.records
                   if r.axis_value == v and r.scheme == "fd_nonuniform"][0] for v in spec.values])
print("zero-rate fraction", zeros)
