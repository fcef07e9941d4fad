"""High-precision reference values (mpmath, 40 digits).

D(q)   = int_0^inf f ln(f/g) dr
D'(q)  = d/dq D via mpmath numerical differentiation
m(g)   = 1 - E_f[(I1/I0)(sqrt(g) r)^2]
"""
import mpmath as mp

mp.mp.dps = 40


def log_f(r, q):
    x = r * mp.sqrt(q)
    return mp.log(r) - (r * r + q) / 2 + mp.log(mp.besseli(0, x))


def log_g(r, q):
    s = 1 + q / 2
    return mp.log(r) - mp.log(s) - r * r / (2 * s)


def pts(q):
    c = mp.sqrt(q)
    lo = max(mp.mpf(0), c - 14)
    return sorted(set([mp.mpf(0), lo, c, c + 4, c + 14, c + 40]))


def D(q):
    q = mp.mpf(q)
    if q == 0:
        return mp.mpf(0)
    h = lambda r: mp.exp(log_f(r, q)) * (log_f(r, q) - log_g(r, q)) if r > 0 else mp.mpf(0)
    return mp.quad(h, pts(q))


def m_tone(gm):
    gm = mp.mpf(gm)
    h = lambda r: mp.exp(log_f(r, gm)) * (mp.besseli(1, r * mp.sqrt(gm)) / mp.besseli(0, r * mp.sqrt(gm))) ** 2 if r > 0 else mp.mpf(0)
    return 1 - mp.quad(h, pts(gm))


if __name__ == "__main__":
    print("i0e(1)", mp.besseli(0, 1) * mp.exp(-1))
    print("ratio(1)", mp.besseli(1, 1) / mp.besseli(0, 1))
    print("ratio(100)", mp.besseli(1, 100) / mp.besseli(0, 100))
    for xv in [0.5, 5, 7.75, 8, 15, 30, 31, 100, 1000, 1e5]:
        print("i0e", xv, mp.besseli(0, xv) * mp.exp(-xv), "ratio", mp.besseli(1, xv) / mp.besseli(0, xv))
    for qv in ["0.1", "1", "2", "2.5", "10", "14.285714285714285714", "100", "1000"]:
        dv = D(qv)
        dp = mp.diff(D, mp.mpf(qv))
        print("q", qv, "D", mp.nstr(dv, 25), "Dp", mp.nstr(dp, 25), "m", mp.nstr(m_tone(qv), 25))
