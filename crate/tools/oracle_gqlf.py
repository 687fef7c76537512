#!/usr/bin/env python3
"""Extended-precision oracle for the GQLF golden values.

Reads the committed golden path CSV and evaluates the three Gaussian
quasi-likelihood sums for the study-1 diff2 coefficient at theta = (-2, 3),
straight from their defining formulas, in 40-digit arithmetic.
"""
import csv
import sys

from mpmath import exp, log, mp, mpf, pi

mp.dps = 40

PATH = sys.argv[1] if len(sys.argv) > 1 else "crates/volsel/tests/data/golden_path.csv"
THETA = (mpf(-2), mpf(3))
LAM = mpf("0.2")

rows = list(csv.DictReader(open(PATH)))
n = len(rows) - 1
h = mpf(rows[1]["t"]) - mpf(rows[0]["t"])
sqrt_h = h ** mpf("0.5")

std = dp = hld = mpf(0)
offset = (2 * pi) ** (-LAM / 2) / (LAM + 1) ** (mpf(3) / 2)
for j in range(1, n + 1):
    ny = (mpf(rows[j]["y_1"]) - mpf(rows[j - 1]["y_1"])) / sqrt_h
    s = exp(THETA[0] * mpf(rows[j - 1]["x_1"]) + THETA[1] * mpf(rows[j - 1]["x_2"]))
    quad = ny * ny / s
    std += -mpf("0.5") * log(2 * pi * h) - mpf("0.5") * log(s) - mpf("0.5") * quad
    phi_lam = (2 * pi) ** (-LAM / 2) * exp(-LAM / 2 * quad)
    dp += s ** (-LAM / 2) * (phi_lam / LAM - offset)
    hld += s ** (-LAM / (2 * (LAM + 1))) * phi_lam / LAM

print(f"n = {n}, h = {h}")
print(f"standard       = {mp.nstr(std, 20)}")
print(f"density-power  = {mp.nstr(dp, 20)}")
print(f"holder         = {mp.nstr(hld, 20)}")
