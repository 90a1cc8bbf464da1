"""Smoke test for the hyperkernel Python extension.

Build and install first, e.g.
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/hyperkernel-*.whl
then run `python python/smoke_test.py`.
"""

import math
from fractions import Fraction

import hyperkernel as hk


def close(a, b, tol):
    return abs(float(a) - float(b)) <= tol * abs(float(b))


def main():
    rep = hk.k_eval(0, 5, 1, "0.5")
    assert rep.method == "closed_form", rep
    assert close(rep.value, hk.k_series(0, 5, 1, "0.5").value, 1e-15)
    assert close(rep.value, hk.k_quadrature(0, 5, 1, "0.5").value, 1e-15)
    assert hk.k_eval(1, 3, 1, "1e-6").method == "series"
    assert hk.k_eval(1, 3, 1, "0.9999").method == "quadrature_fallback"
    try:
        hk.k_eval(2, 4, 1, 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("kappa > beta accepted")

    assert Fraction(hk.j_integral(5, 0)) == 120
    j0 = math.sqrt(math.pi) / 2 * math.exp(0.25) * math.erfc(0.5)
    assert close(hk.j_integral(0, 1), j0, 1e-14)
    assert close(hk.laguerre_kernel(5, 2, 2, "0.7"), hk.laguerre_kernel(5, 2, 2, "0.7", route="erfc"), 1e-28)

    assert [Fraction(a) for a in hk.neumann_adams_coeffs(1, 1)][-1] == Fraction(1, 3)
    t, s = hk.ts_coefficients(5, 1, 1)
    assert Fraction(t[0]) == 1 and Fraction(s[0]) == 1
    assert all(Fraction(c).denominator == 1 for c in t + s)

    b = hk.b_kernel(5, 0, 0, 0, 0, 1, "0.3")
    k4 = hk.k_eval(0, 4, 1, "0.3").value
    assert close(b, math.sqrt(2 * math.pi / 0.3) * float(k4), 1e-14)

    ch = hk.ChannelIndices(l1=1, l2=0, mu1=1, n1=1)
    assert ch.swapped() == hk.ChannelIndices(l1=0, l2=1, mu2=1, n2=1)
    pot = hk.GaussianPotential("1", [("2.5", "0.5"), ("-1.25", "1.5")])
    me = pot.matrix_element(hk.ChannelIndices(), bits=128, tol="1e-20")
    parts = sum(float(a) * float(i2) for a, _, i2, _ in me["breakdown"])
    assert close(me["pair12"], parts, 1e-15)
    print("smoke test passed:", rep)


if __name__ == "__main__":
    main()
