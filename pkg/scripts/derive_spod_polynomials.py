"""Symbolic f1..f5 for the switching single-photon source.

Builds the two-mode Fock representation of u' = p v + q u^+, v' = p u + q v^+
with d = (mu - nu n) n, n = u'^+ u', and prints each vacuum moment as a
polynomial in chi at p = 1, mu = 3/2, nu = 1/2. The numeric values are then
checked against ctcsim.fockctc.spod_f_values.

Needs sympy (script only; the package itself does not import it).
"""

import argparse

import numpy as np
import sympy as sp
from sympy import kronecker_product as kp

from ctcsim.fockctc import spod_f_values


def moments(L: int = 12):
    chi = sp.symbols("chi", positive=True)
    p, q, mu, nu = 1, chi, sp.Rational(3, 2), sp.Rational(1, 2)
    a = sp.SparseMatrix(L, L, lambda i, j: sp.sqrt(j) if i == j - 1 else 0)
    I = sp.eye(L)
    u, v = sp.SparseMatrix(kp(a, I)), sp.SparseMatrix(kp(I, a))
    up, vp = p * v + q * u.T, p * u + q * v.T
    n = up.T * up
    Id = sp.eye(L * L)
    d = (mu * Id - nu * n) * n
    od = Id - d
    vac = sp.zeros(L * L, 1)
    vac[0] = 1

    def ev(ops):
        k = vac
        for O in reversed(ops):
            k = (O * k).applyfunc(sp.expand)
        return sp.expand((vac.T * k)[0])

    fs = [ev([vp.T, d, d, vp]), ev([od, od]), ev([od] * 4),
          ev([vp.T, d, d, vp, od, od]), ev([vp.T, d, vp.T, d, d, vp, d, vp])]
    return chi, fs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=12, help="Fock cutoff per mode")
    ap.add_argument("--chi", type=float, default=0.05, help="numeric check point")
    args = ap.parse_args()
    chi, fs = moments(args.L)
    numeric = spod_f_values(args.chi)
    for k, (f, x) in enumerate(zip(fs, numeric), start=1):
        val = float(f.subs(chi, args.chi))
        print(f"f{k} = {sp.factor(f)}")
        print(f"     at chi={args.chi}: symbolic {val:.15g}, package {x:.15g}, diff {abs(val - x):.1e}")
    assert np.allclose([float(f.subs(chi, args.chi)) for f in fs], numeric, rtol=1e-10)


if __name__ == "__main__":
    main()
