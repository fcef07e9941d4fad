"""Small-q expansion of the Rician/Rayleigh divergence.

D(q) = ln(1+q/2) - q + E_f[ln I0(r sqrt q)],  r ~ Rician(sqrt q, 1)

ln I0(x) = sum_k c_k x^(2k); E_f[r^(2k)] = 2^k k! L_k(-q/2).
Prints exact rational coefficients of q^m for D and of dD/dq.
"""
import sympy as sp

q, x = sp.symbols("q x")
ORDER = 12

li0 = sp.series(sp.log(sp.besseli(0, x)), x, 0, 2 * ORDER + 2).removeO()
li0 = sp.expand(li0)
expect = 0
for k in range(1, ORDER + 1):
    ck = li0.coeff(x, 2 * k)
    moment = 2**k * sp.factorial(k) * sp.assoc_laguerre(k, 0, -q / 2)
    expect += ck * q**k * sp.expand(moment)
d = sp.series(sp.log(1 + q / 2), q, 0, ORDER + 1).removeO() - q + sp.expand(expect)
d = sp.expand(d)
coeffs = [d.coeff(q, m) for m in range(0, ORDER + 1)]
for m, c in enumerate(coeffs):
    print(m, c, float(c))
