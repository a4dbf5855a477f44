"""Extended-precision Frechet distance oracle for the integer-formula test matrices.

Matrices are built from small-integer formulas so the f64 inputs in the Rust
tests are exact; the trace term is evaluated with 60-digit eigendecompositions.
"""
import mpmath as mp

mp.mp.dps = 60


def case(d, k):
    b = [[((i * 7 + j * 3 + k * 5) % 11) - 5 for j in range(d)] for i in range(d)]
    c = [[((i * 3 + j * j * 2 + k) % 9) - 4 for j in range(d)] for i in range(d)]
    ss = mp.matrix(d, d)
    sg = mp.matrix(d, d)
    for i in range(d):
        for j in range(d):
            ss[i, j] = sum(b[i][t] * b[j][t] for t in range(d)) + (d if i == j else 0)
            sg[i, j] = sum(c[i][t] * c[j][t] for t in range(d)) + (d + k if i == j else 0)
    mu_s = [(i % 3) - 1 for i in range(d)]
    mu_g = [mp.mpf((i * 5 + k) % 4) / 2 for i in range(d)]
    return mu_s, ss, mu_g, sg


def frechet(mu_s, ss, mu_g, sg):
    d = ss.rows
    ev, q = mp.eigsy(ss)
    root = q * mp.diag([mp.sqrt(x) for x in ev]) * q.T
    inner = root * sg * root
    ev2, _ = mp.eigsy((inner + inner.T) / 2)
    tr = sum(mp.sqrt(x) for x in ev2)
    dm = sum((mu_s[i] - mu_g[i]) ** 2 for i in range(d))
    return dm + sum(ss[i, i] for i in range(d)) + sum(sg[i, i] for i in range(d)) - 2 * tr


for d, k in [(2, 1), (3, 2), (4, 11), (5, 3), (6, 4), (8, 5)]:
    print(d, k, mp.nstr(frechet(*case(d, k)), 25))
