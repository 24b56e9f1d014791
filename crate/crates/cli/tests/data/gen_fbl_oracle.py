"""Regenerates fbl_oracle.csv: FBL error probabilities at 50 significant digits.

Points: gamma log-uniform on (0.1, 100], integer d in [8, 1024], m uniform on
[d/8, 4000]; only points with |omega| <= 8 are kept. Inputs are written with
repr() so they parse back to the same doubles.

    python3 gen_fbl_oracle.py > fbl_oracle.csv
"""

import random
import sys

from mpmath import mp, mpf, log, log1p, sqrt, erfc

mp.dps = 50
N = 1000


def error_probability(gamma, d, m):
    g, d, m = mpf(gamma), mpf(d), mpf(m)
    c = log1p(g)
    v = 1 - 1 / (1 + g) ** 2
    w = sqrt(m / v) * (c - d * log(2) / m)
    return w, erfc(w / sqrt(2)) / 2


def main():
    rng = random.Random(20240521)
    out = sys.stdout
    out.write("gamma,d,m,omega,eps\n")
    kept = 0
    while kept < N:
        gamma = 10 ** rng.uniform(-1.0, 2.0)
        d = rng.randint(8, 1024)
        m = rng.uniform(d / 8, 4000.0)
        w, eps = error_probability(gamma, d, m)
        if abs(w) > 8:
            continue
        out.write(f"{gamma!r},{d},{m!r},{mp.nstr(w, 25)},{mp.nstr(eps, 30)}\n")
        kept += 1


if __name__ == "__main__":
    main()
