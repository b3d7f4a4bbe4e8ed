"""
Where the splitting ratio sits
==============================

For a fixed splitting ratio the power allocation is a convex problem and
is solved exactly.  Scanning a shared ratio shows the trade-off between
decoding at the relay and powering its transmitter.
"""

# %%
import numpy as np

from fdrelay import LinkModel, SystemConfig, allocate_fixed_rho, decompose, generate_channels
from fdrelay.config import dbm_to_watts

cfg = SystemConfig(ns=2, nr=4, nd=2, ps_watts=dbm_to_watts(35.0))
m = LinkModel(decompose(generate_channels(cfg, seed=11)), cfg)

# %%
# First hop falls and second hop rises with rho; the rate is their minimum
rhos = np.linspace(0.5, 0.999, 40)
rows = []
for r in rhos:
    s = allocate_fixed_rho(m, np.full(m.nr, r), "uniform")
    rows.append((r, s.r1, s.r2, s.rate, s.pr))
rows = np.array(rows)
for r, r1, r2, rate, pr in rows[::4]:
    print(f"rho {r:.3f}  R1 {r1:7.3f}  R2 {r2:7.3f}  rate {rate:7.3f}  P_r {1e3 * pr:8.3f} mW")

# %%
best = rows[np.argmax(rows[:, 3])]
print(f"best shared ratio on the grid: {best[0]:.4f} -> {best[3]:.4f} bits/s/Hz")
