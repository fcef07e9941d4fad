"""Extended-precision Gaussian causal error (2N/q)·ln(1 + q/(2N)) at q = 100, N = 1..40."""
from mpmath import mp, mpf, log

mp.dps = 40
q = mpf(100)
for n in range(1, 41):
    v = 2 * n / q * log(1 + q / (2 * n))
    print(f"    {mp.nstr(v, 25)},")
