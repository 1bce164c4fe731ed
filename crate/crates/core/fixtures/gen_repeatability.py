"""Writes repeatability_clusters.csv and the expected statistics.

Five clusters of repeated approaches, one every 120 s over four hours, with
a slow sinusoidal drift and isotropic Gaussian scatter. The statistics are
computed here independently: centered time-window rolling mean per
coordinate, half-window trimming at both ends, then l_bar, S_l (ddof=1) and
RP = l_bar + 3 S_l in micrometres.
"""
import json

import numpy as np

WINDOW = 1800.0
rng = np.random.default_rng(9283)
rows = []
centres = rng.uniform(-800.0, 800.0, size=(5, 3)) + np.array([1200.0, 0.0, 1200.0])
for c, centre in enumerate(centres):
    t = np.arange(0.0, 4 * 3600.0 + 1.0, 120.0) + 7.0 * c
    drift = 0.010 * np.sin(2 * np.pi * t / 9000.0 + c)[:, None] * np.array([1.0, 0.5, -0.8])
    pts = centre + drift + rng.normal(0.0, 0.0039, size=(t.size, 3))
    for ti, p in zip(t, pts):
        rows.append((f"p{c + 1}", float(ti), *map(float, p)))

with open("repeatability_clusters.csv", "w") as f:
    f.write("cluster,timestamp,x,y,z\n")
    for r in rows:
        f.write(f"{r[0]},{r[1]!r},{r[2]!r},{r[3]!r},{r[4]!r}\n")

dist = []
for name in sorted({r[0] for r in rows}):
    t = np.array([r[1] for r in rows if r[0] == name])
    p = np.array([r[2:] for r in rows if r[0] == name])
    half = WINDOW / 2
    for j in range(t.size):
        if t[j] - t[0] < half or t[-1] - t[j] < half:
            continue
        m = p[np.abs(t - t[j]) <= half].mean(axis=0)
        dist.append(np.linalg.norm(p[j] - m) * 1e3)
dist = np.array(dist)
l_bar = dist.mean()
s_l = dist.std(ddof=1)
expected = {"window_s": WINDOW, "n_points": int(dist.size), "l_bar_um": float(l_bar), "s_l_um": float(s_l), "rp_um": float(l_bar + 3 * s_l)}
with open("repeatability_expected.json", "w") as f:
    json.dump(expected, f, indent=2)
    f.write("\n")
print(expected)
