#!/usr/bin/env python3
"""Generate fixtures/elliptic.json from independent high-precision oracles.

Everything here is computed with mpmath at 40 significant digits using
formulas that share no code with the library:

* theta1 and its z-derivatives: 60-term q-series, term-by-term derivative.
* Dedekind eta log-derivative: eta = e^{i pi tau/12} prod (1 - e^{2 pi i n tau}),
  differentiated analytically (geometric series).
* Weierstrass wp: the lattice sum over Z + tau Z with each constant-n row
  summed in closed form (sum_m 1/(w-m)^2 = pi^2/sin^2(pi w)), which is the
  exact tail correction of the m-direction; the remaining n-sum converges
  geometrically and is truncated at |n| <= 200.
* Weierstrass zeta: same row-summation idea with cotangent rows.

Run from the repository root:  python tools/gen_fixtures.py
"""

import json
import pathlib

import mpmath as mp

mp.mp.dps = 40

N_ROWS = 200
N_TERMS = 60


def theta1_oracle(z, tau, k=0):
    q = mp.exp(1j * mp.pi * tau)
    total = mp.mpc(0)
    for m in range(N_TERMS):
        a = 2 * m + 1
        term = 2 * (-1) ** m * q ** mp.mpf((2 * m + 1) ** 2 / 4.0)
        term *= (a * mp.pi) ** k * mp.sin(a * mp.pi * z + k * mp.pi / 2)
        total += term
    return total


def g1_oracle(tau):
    return theta1_oracle(0, tau, 3) / (12j * mp.pi * theta1_oracle(0, tau, 1))


def eta_logderiv_oracle(tau):
    qbar = mp.exp(2j * mp.pi * tau)
    s = mp.mpc(0)
    for n in range(1, 400):
        s += n * qbar**n / (1 - qbar**n)
    return 1j * mp.pi / 12 - 2j * mp.pi * s


def wp_oracle(z, tau):
    total = mp.pi**2 / mp.sin(mp.pi * z) ** 2 - mp.pi**2 / 3
    for n in range(1, N_ROWS + 1):
        total += mp.pi**2 / mp.sin(mp.pi * (z - n * tau)) ** 2
        total += mp.pi**2 / mp.sin(mp.pi * (z + n * tau)) ** 2
        total -= 2 * mp.pi**2 / mp.sin(mp.pi * n * tau) ** 2
    return total


def zeta_oracle(z, tau):
    total = mp.pi * mp.cot(mp.pi * z) + mp.pi**2 * z / 3
    for n in range(1, N_ROWS + 1):
        total += mp.pi * mp.cot(mp.pi * (z - n * tau))
        total += mp.pi * mp.cot(mp.pi * (z + n * tau))
        total += 2 * z * mp.pi**2 / mp.sin(mp.pi * n * tau) ** 2
    return total


def cplx(x):
    x = mp.mpc(x)
    return [float(x.real), float(x.imag)]


def rec(fn, args, value, abs_tol):
    return {"fn": fn, "args": args, "expected": cplx(value), "abs_tol": abs_tol}


def main():
    tau_a = mp.mpc(0.3, 1.2)
    records = [
        rec("theta1", {"z": [0.3, 0.0], "tau": [0.3, 1.2], "deriv_order": 0},
            theta1_oracle(mp.mpf("0.3"), tau_a, 0), 1e-13),
        rec("theta1", {"z": [0.17, 0.21], "tau": [0.3, 1.2], "deriv_order": 1},
            theta1_oracle(mp.mpc("0.17", "0.21"), tau_a, 1), 1e-12),
        rec("theta1", {"z": [0.17, 0.21], "tau": [0.3, 1.2], "deriv_order": 2},
            theta1_oracle(mp.mpc("0.17", "0.21"), tau_a, 2), 1e-11),
        rec("theta1", {"z": [-0.4, 0.1], "tau": [0.0, 2.0], "deriv_order": 3},
            theta1_oracle(mp.mpc("-0.4", "0.1"), mp.mpc(0, 2), 3), 1e-10),
        rec("g1", {"tau": [0.0, 1.0]}, g1_oracle(mp.mpc(0, 1)), 1e-14),
        rec("g1", {"tau": [0.0, 2.0]}, g1_oracle(mp.mpc(0, 2)), 1e-14),
        rec("g1", {"tau": [0.3, 1.2]}, g1_oracle(tau_a), 1e-14),
        rec("eta_logderiv", {"tau": [0.0, 1.0]}, eta_logderiv_oracle(mp.mpc(0, 1)), 1e-13),
        rec("eta_logderiv", {"tau": [0.0, 2.0]}, eta_logderiv_oracle(mp.mpc(0, 2)), 1e-13),
        rec("eta_logderiv", {"tau": [0.3, 1.2]}, eta_logderiv_oracle(tau_a), 1e-13),
        rec("wp", {"z": [0.2, 0.0], "tau": [0.0, 1.0], "deriv_order": 0},
            wp_oracle(mp.mpf("0.2"), mp.mpc(0, 1)), 1e-10),
        rec("wp", {"z": [0.31, 0.11], "tau": [0.0, 1.3], "deriv_order": 0},
            wp_oracle(mp.mpc("0.31", "0.11"), mp.mpc(0, "1.3")), 1e-10),
        rec("wp", {"z": [0.31, 0.11], "tau": [0.3, 1.2], "deriv_order": 1},
            mp.diff(lambda w: wp_oracle(w, tau_a), mp.mpc("0.31", "0.11")), 1e-9),
        rec("zeta_w", {"z": [0.2, 0.0], "tau": [0.0, 1.0]},
            zeta_oracle(mp.mpf("0.2"), mp.mpc(0, 1)), 1e-10),
        rec("zeta_w", {"z": [0.27, 0.0], "tau": [0.0, 1.5]},
            zeta_oracle(mp.mpf("0.27"), mp.mpc(0, "1.5")), 1e-10),
    ]
    out = pathlib.Path(__file__).resolve().parents[1] / "fixtures" / "elliptic.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(records, indent=1) + "\n")
    print(f"wrote {len(records)} records to {out}")


if __name__ == "__main__":
    main()
