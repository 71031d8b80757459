"""Hand evaluation of the vegetation indices on 20 random band tuples.

Writes spectral_oracle.csv next to this file. Band values are printed with 17
significant digits so they round-trip to the same binary64 inputs.
"""
import csv
import os
import random

from mpmath import mp, mpf

mp.dps = 50
rng = random.Random(20240607)

def idx(b, g, r, n):
    rb = r - (b - r) / 2
    return {
        "ARVI": (n - rb) / (n + rb),
        "DVI": n - r,
        "GNDVI": (n - g) / (n + g),
        "NDVI": (n - r) / (n + r),
        "OSAVI": (n - r) / (n + r + mpf("0.16")),
        "RGRI": r - g,
        "NormG": g / (r + g + g),
        "RGRI_corrected": r / g,
        "NormG_corrected": g / (r + g + b),
    }

names = ["ARVI", "DVI", "GNDVI", "NDVI", "OSAVI", "RGRI", "NormG", "RGRI_corrected", "NormG_corrected"]
out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "spectral_oracle.csv")
with open(out, "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["blue", "green", "red", "red_edge", "nir"] + names)
    for _ in range(20):
        bands = [float("%.17g" % rng.uniform(0.01, 0.6)) for _ in range(5)]
        b, g, r, _, n = [mpf(x) for x in bands]
        v = idx(b, g, r, n)
        w.writerow(["%.17g" % x for x in bands] + [mp.nstr(v[k], 25, strip_zeros=False) for k in names])
