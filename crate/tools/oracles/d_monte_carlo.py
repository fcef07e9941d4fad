"""Monte Carlo expectation oracle for D(q) = E_f[ln f(r) - ln g(r)].

r = |sqrt(q) e^{i theta} + n|, n complex normal with unit-variance parts.
"""
import numpy as np
from scipy.special import i0e

DRAWS = 10_000_000


def log_ratio(r, q):
    x = r * np.sqrt(q)
    s = 1 + q / 2
    log_f = np.log(r) - (r * r + q) / 2 + x + np.log(i0e(x))
    log_g = np.log(r) - np.log(s) - r * r / (2 * s)
    return log_f - log_g


for q in (2.0, 100.0):
    rng = np.random.default_rng(20260417)
    theta = rng.uniform(0, 2 * np.pi, DRAWS)
    re = np.sqrt(q) * np.cos(theta) + rng.standard_normal(DRAWS)
    im = np.sqrt(q) * np.sin(theta) + rng.standard_normal(DRAWS)
    v = log_ratio(np.hypot(re, im), q)
    print(q, repr(v.mean()), repr(v.std(ddof=1) / np.sqrt(DRAWS)))
