"""Jacobi theta-1 and Weierstrass functions from a single q-series primitive.

Conventions (fixed once, everything downstream inherits them):

  theta1(z, tau) = 2 * sum_{m>=0} (-1)^m q^{(m+1/2)^2} sin((2m+1) pi z),
  q = exp(i pi tau)

  g1(tau)   = theta1'''(0, tau) / (12 pi i theta1'(0, tau))
  wp(z)     = -(d^2/dz^2) log theta1(z, tau) + 4 pi i g1(tau)
  zeta_w(z) = theta1'(z)/theta1(z) - 4 pi i g1(tau) z

The g1 normalisation is chosen so the Laurent expansion of wp at 0 is
1/z^2 + O(z^2) with no constant term; wp and zeta_w then coincide with the
classical Weierstrass functions of the lattice Z + tau Z.  The identity
g1 = eta'/eta (Dedekind eta) is a consequence and is checked in the tests,
not assumed anywhere.

z-derivatives are always analytic (term-by-term for theta1, log-derivative
recursions plus the differentiated Weierstrass ODE for wp); no finite
differences.  Arguments are never reduced modulo the lattice here: callers
that need reduction do it themselves, because the superpotential relies on
the quasi-periodicity factors of unreduced arguments.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidTau, OnLattice, SeriesDivergence

_REL_TOL = 1e-16
_MAX_TERMS = 500
_LATTICE_GUARD = 1e-9

TWO_PI_I = 2j * math.pi


@dataclass(frozen=True)
class ModularParameter:
    """Point of the upper half-plane."""

    tau: complex

    def __post_init__(self):
        if not self.tau.imag > 0.0:
            raise InvalidTau(f"Im(tau) must be positive, got {self.tau}")

    @property
    def nome(self) -> complex:
        return cmath.exp(1j * math.pi * self.tau)


@dataclass(frozen=True)
class EllipticValue:
    """A function value together with a series-truncation error bound."""

    value: complex
    est_error: float


def _tau_of(tau) -> complex:
    """Accept either a bare complex or a ModularParameter; validate."""
    t = tau.tau if isinstance(tau, ModularParameter) else complex(tau)
    if not t.imag > 0.0:
        raise InvalidTau(f"Im(tau) must be positive, got {t}")
    return t


def theta1_raw(z, tau: complex, deriv_order: int = 0):
    """Vectorised d^k/dz^k theta1(z, tau); returns (values, est_error).

    `z` may be a scalar or ndarray.  est_error is the magnitude bound of the
    first dropped term (a truncation bound, uniform over the array).
    """
    z = np.asarray(z, dtype=complex)
    k = int(deriv_order)
    q = cmath.exp(1j * math.pi * tau)
    # |sin^{(k)}((2m+1) pi z)| <= cosh((2m+1) pi |Im z|)
    im_max = float(np.max(np.abs(z.imag))) if z.size else 0.0
    if 3.0 * math.pi * im_max > 650.0:
        raise SeriesDivergence(
            f"|Im z| = {im_max:g} is far outside the series' useful range; "
            "reduce z modulo the lattice first")
    total = np.zeros_like(z)
    phase = k * math.pi / 2.0
    for m in range(_MAX_TERMS):
        a = 2 * m + 1
        coeff = 2.0 * (-1) ** m * q ** ((m + 0.5) ** 2) * (a * math.pi) ** k
        total = total + coeff * np.sin(a * math.pi * z + phase)
        bound_next = (
            2.0
            * abs(q) ** ((m + 1.5) ** 2)
            * ((a + 2) * math.pi) ** k
            * math.cosh((a + 2) * math.pi * im_max)
        )
        scale = float(np.max(np.abs(total)))
        if bound_next <= _REL_TOL * max(scale, 1e-300):
            return total if total.shape else complex(total), bound_next
    raise SeriesDivergence(
        f"theta1 series needs more than {_MAX_TERMS} terms "
        f"(|Im z| = {im_max:g}); reduce z modulo the lattice first"
    )


def theta1(z: complex, tau, deriv_order: int = 0) -> EllipticValue:
    """d^k/dz^k of theta1 at a single point, with truncation-error estimate."""
    if deriv_order > 6 or deriv_order < 0:
        raise ValueError("deriv_order must be in 0..6")
    t = _tau_of(tau)
    val, err = theta1_raw(complex(z), t, deriv_order)
    return EllipticValue(complex(val), err)


@lru_cache(maxsize=256)
def _tau_constants(tau: complex):
    """Per-tau constants: theta1 odd derivatives at 0, g1, g2."""
    d1, _ = theta1_raw(0.0, tau, 1)
    d3, _ = theta1_raw(0.0, tau, 3)
    d5, _ = theta1_raw(0.0, tau, 5)
    c3 = d3 / d1
    c5 = d5 / d1
    g1_val = c3 / (12j * math.pi)
    # from the Laurent expansion of wp at 0: coefficient of z^2 is g2/20
    g2_val = (10.0 / 3.0) * c3 * c3 - 2.0 * c5
    return complex(d1), complex(c3), complex(c5), complex(g1_val), complex(g2_val)


def g1(tau) -> complex:
    """Quasi-modular coefficient theta1'''(0)/(12 pi i theta1'(0))."""
    t = _tau_of(tau)
    return _tau_constants(t)[3]


def g2_invariant(tau) -> complex:
    """Weierstrass g2 of the lattice Z + tau Z (from theta constants)."""
    t = _tau_of(tau)
    return _tau_constants(t)[4]


def theta1_prime0(tau) -> complex:
    """theta1'(0, tau)."""
    t = _tau_of(tau)
    return _tau_constants(t)[0]


def lattice_distance(z: complex, tau: complex) -> float:
    """Distance from z to the nearest point of Z + tau Z."""
    b = z.imag / tau.imag
    a = z.real - b * tau.real
    best = math.inf
    for da in (math.floor(a), math.floor(a) + 1):
        for db in (math.floor(b), math.floor(b) + 1):
            best = min(best, abs(z - (da + db * tau)))
    return best


def _check_off_lattice(z, tau: complex):
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    for w in zs.ravel():
        if lattice_distance(complex(w), tau) < _LATTICE_GUARD:
            raise OnLattice(f"z = {w} is within {_LATTICE_GUARD} of the lattice")


def log_theta_derivs(z, tau: complex, upto: int):
    """Derivatives d^m/dz^m log theta1(z, tau) for m = 1..upto (vectorised).

    Uses theta1^{(m)} = sum_j C(m-1, j) L^{(1+j)} theta1^{(m-1-j)} solved for
    L^{(m)}; needs theta derivatives up to order `upto` only.
    """
    z = np.asarray(z, dtype=complex)
    th = [theta1_raw(z, tau, m)[0] for m in range(upto + 1)]
    th = [np.asarray(t) for t in th]
    L = [None]  # L[m] = d^m log theta1, 1-indexed
    for m in range(1, upto + 1):
        acc = th[m].copy()
        for j in range(0, m - 1):
            acc = acc - math.comb(m - 1, j) * L[1 + j] * th[m - 1 - j]
        L.append(acc / th[0])
    return L


def wp_raw(z, tau: complex, deriv_order: int = 0):
    """Vectorised wp^{(k)}(z, tau) for k up to 8; no lattice guard."""
    k = int(deriv_order)
    _, _, _, g1v, g2v = _tau_constants(tau)
    L = log_theta_derivs(z, tau, 3)
    p0 = -L[2] + 4j * math.pi * g1v
    if k == 0:
        return p0
    p1 = -L[3]
    if k == 1:
        return p1
    derivs = [p0, p1, 6.0 * p0 * p0 - g2v / 2.0]
    # wp^{(m+2)} = 6 sum_j C(m,j) wp^{(j)} wp^{(m-j)},  m >= 1
    for m in range(1, k - 1):
        acc = np.zeros_like(np.asarray(p0))
        for j in range(0, m + 1):
            acc = acc + math.comb(m, j) * derivs[j] * derivs[m - j]
        derivs.append(6.0 * acc)
    return derivs[k]


def wp(z: complex, tau, deriv_order: int = 0) -> EllipticValue:
    """Weierstrass wp^{(k)}(z, tau), normalised to zero constant Laurent term."""
    if deriv_order > 8 or deriv_order < 0:
        raise ValueError("deriv_order must be in 0..8")
    t = _tau_of(tau)
    _check_off_lattice(z, t)
    val = wp_raw(complex(z), t, deriv_order)
    _, err = theta1_raw(complex(z), t, 0)
    d = lattice_distance(complex(z), t)
    return EllipticValue(complex(val), err / max(d, _LATTICE_GUARD) ** (deriv_order + 2))


@lru_cache(maxsize=256)
def wp_taylor_coeffs(tau: complex, upto: int) -> tuple:
    """Coefficients a_m of wp(z) = 1/z^2 + sum_{m>=2} a_m z^{2m-2}.

    a_2 = g2/20, a_3 = g3/28, then the classical quadratic recursion
    a_m = 3/((2m+1)(m-3)) sum_{j=2}^{m-2} a_j a_{m-j}.
    """
    _, _, _, _, g2v = _tau_constants(tau)
    # g3 from the Weierstrass cubic at a generic point
    z0 = 0.31 + 0.17j
    p0 = wp_raw(z0, tau, 0)
    p1 = wp_raw(z0, tau, 1)
    g3v = 4.0 * p0**3 - g2v * p0 - p1 * p1
    a = {2: g2v / 20.0, 3: g3v / 28.0}
    for m in range(4, upto + 1):
        s = sum(a[j] * a[m - j] for j in range(2, m - 1))
        a[m] = 3.0 * s / ((2 * m + 1) * (m - 3))
    return tuple(a[m] for m in range(2, upto + 1))


def wp_deriv_constant_term(tau: complex, j: int) -> complex:
    """Constant Laurent term of wp^{(j)} at 0 (zero for odd j or j < 2)."""
    if j < 2 or j % 2:
        return 0.0
    m = j // 2 + 1
    coeffs = wp_taylor_coeffs(tau, m)
    return math.factorial(j) * coeffs[m - 2]


def zeta_w_raw(z, tau: complex):
    """Vectorised Weierstrass zeta via theta1'/theta1 - 4 pi i g1 z."""
    z = np.asarray(z, dtype=complex)
    _, _, _, g1v, _ = _tau_constants(tau)
    t0 = theta1_raw(z, tau, 0)[0]
    t1 = theta1_raw(z, tau, 1)[0]
    return t1 / t0 - 4j * math.pi * g1v * z


def zeta_w(z: complex, tau) -> EllipticValue:
    """Weierstrass zeta function (odd, zeta' = -wp)."""
    t = _tau_of(tau)
    _check_off_lattice(z, t)
    val = zeta_w_raw(complex(z), t)
    _, err = theta1_raw(complex(z), t, 0)
    d = lattice_distance(complex(z), t)
    return EllipticValue(complex(val), err / max(d, _LATTICE_GUARD))
