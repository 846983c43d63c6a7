"""Points of the covering space, the group action, the superpotential, and
extraction of its generators.

A point carries (u, v_0..v_{n-1}, v_ex, tau); the dependent v_n is always
-(v_0 + ... + v_{n-1}), so the full root vector (v_0..v_n) sums to zero.
The superpotential is the elliptic function

  lambda(z) = e^{2 pi i u} prod_i theta1(z - v_i + v_ex) /
              (theta1(z)^n theta1(z + (n+1) v_ex))

with a pole of order n at z = 0 and a simple pole at z = -(n+1) v_ex.  Its
Laurent data at z = 0, written in the basis

  B_0 = 1,
  B_1 = zeta(z) - zeta(z + (n+1)v_ex) + zeta((n+1)v_ex),
  B_k = wp^{(k-2)}(z),   k = 2..n,

yields the generators; the reported phi-vector applies the frozen diagonal
of `conventions`, after which phi_k is literally the z^{-k} Laurent-tail
coefficient of lambda for k >= 1.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import contour as ct
from . import elliptic as el
from .conventions import LAMBDA_EXPONENT_SIGN, normalization_diagonal
from .errors import (
    IllConditioned,
    InvalidGroupElement,
    InvalidTau,
    OnPoleDivisor,
)

TWO_PI_I = 2j * math.pi

DELTA_GENERIC = 0.05
_COND_CAP = 1e8


# ---------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class OrbitPoint:
    """A point (u, v_0..v_{n-1}, v_ex, tau) of the covering space."""

    n: int
    u: complex
    v: tuple
    v_ex: complex
    tau: complex

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("rank n must be >= 2")
        if len(self.v) != self.n:
            raise ValueError(f"expected {self.n} independent v entries, got {len(self.v)}")
        if not complex(self.tau).imag > 0:
            raise InvalidTau(f"Im(tau) must be positive, got {self.tau}")

    @property
    def v_full(self) -> np.ndarray:
        """(v_0, ..., v_n) with the zero-sum closure."""
        vs = np.asarray(self.v, dtype=complex)
        return np.concatenate([vs, [-vs.sum()]])

    @property
    def w(self) -> complex:
        """(n+1) v_ex, the shifted simple-pole location is -w."""
        return (self.n + 1) * self.v_ex

    def zeros(self) -> np.ndarray:
        """Zeros of lambda in the fundamental cell representative v_i - v_ex."""
        return self.v_full - self.v_ex

    def poles(self) -> np.ndarray:
        return np.array([0.0, -self.w], dtype=complex)

    def vvec(self) -> np.ndarray:
        """Flat-chart vector (u, v_0..v_{n-1}, v_ex, tau) of length n+3."""
        return np.concatenate([[self.u], np.asarray(self.v, dtype=complex),
                               [self.v_ex, self.tau]])


def point_from_vvec(n: int, vec) -> OrbitPoint:
    vec = np.asarray(vec, dtype=complex)
    return OrbitPoint(n=n, u=complex(vec[0]), v=tuple(vec[1 : n + 1]),
                      v_ex=complex(vec[n + 1]), tau=complex(vec[n + 2]))


def genericity_margin(p: OrbitPoint) -> float:
    """Smallest of the lattice-modulo separations the construction needs.

    Pairwise distances among {zeros of lambda} u {0, -(n+1)v_ex}, plus the
    distance of v_ex from the order-n division points (j + l tau)/n.
    """
    pts = np.concatenate([p.zeros(), p.poles()])
    tau = complex(p.tau)
    m = math.inf
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            m = min(m, el.lattice_distance(complex(pts[i] - pts[j]), tau))
    for jj in range(p.n):
        for ll in range(p.n):
            d = complex(p.v_ex) - (jj + ll * tau) / p.n
            m = min(m, el.lattice_distance(d, tau))
    return m


def is_generic(p: OrbitPoint, delta: float = DELTA_GENERIC) -> bool:
    return genericity_margin(p) >= delta


def random_point(n: int, tau: complex, seed: int, delta: float = DELTA_GENERIC,
                 max_tries: int = 500) -> OrbitPoint:
    """Seeded generic point: v entries drawn uniformly in a box, rejected
    until the genericity margin clears delta.  Bit-reproducible per seed."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        re = rng.uniform(-0.35, 0.35, size=n + 2)
        im = rng.uniform(-0.25, 0.25, size=n + 2)
        u = complex(re[0], im[0])
        v = tuple(complex(a, b) for a, b in zip(re[1 : n + 1], im[1 : n + 1]))
        v_ex = complex(re[n + 1], im[n + 1])
        p = OrbitPoint(n=n, u=u, v=v, v_ex=v_ex, tau=complex(tau))
        if is_generic(p, delta):
            return p
    raise RuntimeError(f"no generic point found in {max_tries} draws (delta={delta})")


def point_to_json(p: OrbitPoint) -> dict:
    c = lambda z: [complex(z).real, complex(z).imag]
    return {"n": p.n, "u": c(p.u), "v": [c(x) for x in p.v],
            "v_ex": c(p.v_ex), "tau": c(p.tau)}


def point_from_json(d: dict) -> OrbitPoint:
    c = lambda pair: complex(pair[0], pair[1])
    return OrbitPoint(n=int(d["n"]), u=c(d["u"]), v=tuple(c(x) for x in d["v"]),
                      v_ex=c(d["v_ex"]), tau=c(d["tau"]))


# ---------------------------------------------------------------------------
# group elements and the action


@dataclass(frozen=True)
class Permutation:
    """Permutation of the n+1 roots (v_0..v_n); v_ex is fixed."""

    sigma: tuple

    def validate(self, n: int):
        if sorted(self.sigma) != list(range(n + 1)):
            raise InvalidGroupElement(f"sigma must permute 0..{n}")


@dataclass(frozen=True)
class Translation:
    """Lattice translation (lam, mu) on the roots plus exceptional integers."""

    lam: tuple
    mu: tuple
    lam_ex: int = 0
    mu_ex: int = 0

    def validate(self, n: int):
        if len(self.lam) != n + 1 or len(self.mu) != n + 1:
            raise InvalidGroupElement("lam and mu must have n+1 entries")
        if sum(self.lam) != 0 or sum(self.mu) != 0:
            raise InvalidGroupElement("lam and mu must sum to zero")


@dataclass(frozen=True)
class Modular:
    a: int
    b: int
    c: int
    d: int

    def validate(self, n: int):
        if self.a * self.d - self.b * self.c != 1:
            raise InvalidGroupElement("ad - bc must be 1")


def pairing(x: np.ndarray, y: np.ndarray, n: int) -> complex:
    """<x, y> = sum_{i=0..n} x_i y_i - n(n+1) x_ex y_ex on full vectors."""
    return complex(np.dot(x[: n + 1], y[: n + 1]) - n * (n + 1) * x[n + 1] * y[n + 1])


def act(g, p: OrbitPoint) -> OrbitPoint:
    """Group action on the covering space.

    The u-shifts are the ones that leave lambda (with its e^{+2 pi i u}
    prefactor) invariant; they are the opposite of the shifts that pair with
    the e^{-2 pi i u} convention.
    """
    n = p.n
    g.validate(n)
    if isinstance(g, Permutation):
        vf = p.v_full[np.array(g.sigma)]
        return OrbitPoint(n=n, u=p.u, v=tuple(vf[:n]), v_ex=p.v_ex, tau=p.tau)
    if isinstance(g, Translation):
        lam = np.array(list(g.lam) + [g.lam_ex], dtype=complex)
        mu = np.array(list(g.mu) + [g.mu_ex], dtype=complex)
        vv = np.concatenate([p.v_full, [p.v_ex]])
        new = vv + lam * p.tau + mu
        u_new = p.u + pairing(lam, vv, n) + 0.5 * pairing(lam, lam, n) * p.tau
        return OrbitPoint(n=n, u=complex(u_new), v=tuple(new[:n]),
                          v_ex=complex(new[n + 1]), tau=p.tau)
    if isinstance(g, Modular):
        cd = g.c * p.tau + g.d
        vv = np.concatenate([p.v_full, [p.v_ex]])
        u_new = p.u - g.c * pairing(vv, vv, n) / (2.0 * cd)
        new = vv / cd
        tau_new = (g.a * p.tau + g.b) / cd
        return OrbitPoint(n=n, u=complex(u_new), v=tuple(new[:n]),
                          v_ex=complex(new[n + 1]), tau=complex(tau_new))
    raise InvalidGroupElement(f"unknown group element {g!r}")


# ---------------------------------------------------------------------------
# the superpotential and its analytic derivatives


def lambda_raw(z, p: OrbitPoint):
    """Vectorised lambda(z); no pole guard."""
    z = np.asarray(z, dtype=complex)
    tau = complex(p.tau)
    num = np.ones_like(z)
    for zr in p.zeros():
        num = num * el.theta1_raw(z - zr, tau, 0)[0]
    den = el.theta1_raw(z, tau, 0)[0] ** p.n * el.theta1_raw(z + p.w, tau, 0)[0]
    pref = cmath.exp(LAMBDA_EXPONENT_SIGN * TWO_PI_I * p.u)
    return pref * num / den


def lambda_eval(z: complex, p: OrbitPoint) -> complex:
    """lambda at one point, guarding the pole divisor."""
    tau = complex(p.tau)
    for q in p.poles():
        if el.lattice_distance(complex(z - q), tau) < 1e-9:
            raise OnPoleDivisor(f"z = {z} meets the pole divisor at {q}")
    return complex(lambda_raw(z, p))


def _t_ratio(z, tau):
    """theta1'/theta1, vectorised."""
    t0 = el.theta1_raw(z, tau, 0)[0]
    t1 = el.theta1_raw(z, tau, 1)[0]
    return t1 / t0


def _t_ratio2(z, tau):
    """(theta1'/theta1)' = theta1''/theta1 - (theta1'/theta1)^2."""
    t0 = el.theta1_raw(z, tau, 0)[0]
    t1 = el.theta1_raw(z, tau, 1)[0]
    t2 = el.theta1_raw(z, tau, 2)[0]
    return t2 / t0 - (t1 / t0) ** 2


def _heat_ratio(z, tau):
    """d/dtau log theta1 = theta1''/(4 pi i theta1)."""
    t0 = el.theta1_raw(z, tau, 0)[0]
    t2 = el.theta1_raw(z, tau, 2)[0]
    return t2 / (4j * math.pi * t0)


def lambda_dz(z, p: OrbitPoint, lam=None):
    """(lambda, lambda', lambda'') at z, all analytic in z."""
    z = np.asarray(z, dtype=complex)
    tau = complex(p.tau)
    lam = lambda_raw(z, p) if lam is None else lam
    s = -p.n * _t_ratio(z, tau) - _t_ratio(z + p.w, tau)
    sp = -p.n * _t_ratio2(z, tau) - _t_ratio2(z + p.w, tau)
    for zr in p.zeros():
        s = s + _t_ratio(z - zr, tau)
        sp = sp + _t_ratio2(z - zr, tau)
    return lam, lam * s, lam * (s * s + sp)


def lambda_grad(z, p: OrbitPoint, lam=None):
    """d lambda / d(chart coordinate) for (u, v_0..v_{n-1}, v_ex, tau).

    Shape (n+3, len(z)).  Every entry is analytic: the tau column uses the
    heat identity d_tau theta1 = theta1'' / (4 pi i).
    """
    z = np.asarray(z, dtype=complex)
    tau = complex(p.tau)
    lam = lambda_raw(z, p) if lam is None else lam
    zr = p.zeros()
    rows = []
    rows.append(LAMBDA_EXPONENT_SIGN * TWO_PI_I * lam)  # d/du
    t_last = _t_ratio(z - zr[p.n], tau)
    for j in range(p.n):  # d/dv_j with v_n = -sum constraint
        rows.append(lam * (t_last - _t_ratio(z - zr[j], tau)))
    acc = -(p.n + 1) * _t_ratio(z + p.w, tau)
    for i in range(p.n + 1):  # d/dv_ex
        acc = acc + _t_ratio(z - zr[i], tau)
    rows.append(lam * acc)
    acc = -p.n * _heat_ratio(z, tau) - _heat_ratio(z + p.w, tau)
    for i in range(p.n + 1):  # d/dtau
        acc = acc + _heat_ratio(z - zr[i], tau)
    rows.append(lam * acc)
    return np.array(rows)


# ---------------------------------------------------------------------------
# Laurent basis and generator extraction


def basis_eval(k: int, z, p: OrbitPoint):
    """B_k(z) of the Laurent basis at the point's (v_ex, tau)."""
    z = np.asarray(z, dtype=complex)
    tau = complex(p.tau)
    if k == 0:
        return np.ones_like(z)
    if k == 1:
        return (el.zeta_w_raw(z, tau) - el.zeta_w_raw(z + p.w, tau)
                + el.zeta_w_raw(np.full_like(z, p.w), tau))
    return el.wp_raw(z, tau, k - 2)


def pole_safe_radius(p: OrbitPoint) -> float:
    """Quarter distance from 0 to the nearest other pole of lambda/B_1."""
    tau = complex(p.tau)
    d = el.lattice_distance(complex(-p.w), tau)
    d = min(d, abs(complex(1)), abs(complex(tau)), abs(complex(1 + tau)), abs(complex(1 - tau)))
    return min(0.25 * d, 0.2)


def special_safe_radius(p: OrbitPoint) -> float:
    """Quarter distance from 0 to the nearest zero or other pole of lambda."""
    tau = complex(p.tau)
    d = el.lattice_distance(complex(-p.w), tau)
    for zr in p.zeros():
        d = min(d, el.lattice_distance(complex(zr), tau))
    d = min(d, 1.0, abs(complex(tau)))
    return min(0.25 * d, 0.2)


@dataclass(frozen=True)
class JacobiForms:
    """Generator vector (phi_0..phi_n) with the frozen tail normalisation."""

    n: int
    phi: np.ndarray
    raw_coeffs: np.ndarray
    weights: tuple
    index: int
    extraction_residual: float
    cond_estimate: float = field(default=0.0)


def _extraction_system(p: OrbitPoint, radius: float, samples: int = 64):
    """Matrix of Laurent coefficients of B_k at orders -n..0, by quadrature.

    Retained as the cross-check for `extraction_matrix`; the solver uses the
    analytic version."""
    n = p.n
    spec = ct.ContourSpec(0.0, radius, samples)
    m = np.zeros((n + 1, n + 1), dtype=complex)
    for k in range(n + 1):
        win = ct.laurent_window(lambda z, k=k: basis_eval(k, z, p), spec, -n, 0)
        for r, order in enumerate(range(-n, 1)):
            m[r, k] = win[order]
    return m


def extraction_matrix(n: int, tau: complex) -> np.ndarray:
    """Laurent coefficients of the basis at orders -n..0, in closed form.

    B_0 contributes 1 at order 0; B_1 contributes 1 at order -1 (its
    constant term vanishes by the +zeta(w) convention); B_k contributes
    (-1)^k (k-1)! at order -k plus, for even k >= 4, the constant term of
    wp^{(k-2)} at order 0.
    """
    m = np.zeros((n + 1, n + 1), dtype=complex)
    order_row = {o: r for r, o in enumerate(range(-n, 1))}
    m[order_row[0], 0] = 1.0
    if n >= 1:
        m[order_row[-1], 1] = 1.0
    for k in range(2, n + 1):
        m[order_row[-k], k] = (-1) ** k * math.factorial(k - 1)
        m[order_row[0], k] = el.wp_deriv_constant_term(tau, k - 2)
    return m


def extract_jacobi_forms(p: OrbitPoint, samples: int = 64) -> JacobiForms:
    """Solve lambda = sum_k c_k B_k from Laurent data at z = 0.

    Orders -n..0 give an (n+1)x(n+1) linear system; the simple-pole residue
    at z = -(n+1) v_ex supplies one surplus equation whose mismatch is the
    extraction residual.
    """
    n = p.n
    radius = pole_safe_radius(p)
    spec = ct.ContourSpec(0.0, radius, samples)
    lam_win = ct.laurent_window(lambda z: lambda_raw(z, p), spec, -n, 0)
    rhs = np.array([lam_win[o] for o in range(-n, 1)], dtype=complex)
    m = extraction_matrix(n, complex(p.tau))
    cond = float(np.linalg.cond(m))
    if cond > _COND_CAP:
        raise IllConditioned(f"extraction system condition {cond:.2e} exceeds {_COND_CAP:.0e}")
    c = np.linalg.solve(m, rhs)

    # surplus: only B_1 has a pole at -w, with residue -1 there
    r_w = el.lattice_distance(complex(-p.w), complex(p.tau))
    for zr in p.zeros():
        r_w = min(r_w, el.lattice_distance(complex(zr + p.w), complex(p.tau)))
    spec_w = ct.ContourSpec(-p.w, min(0.25 * r_w, 0.2), samples)
    res_w = ct.residue(lambda z: lambda_raw(z, p), spec_w)
    scale = float(np.max(np.abs(c))) or 1.0
    mismatch = abs(res_w + c[1]) / scale

    phi = normalization_diagonal(n) * c
    return JacobiForms(n=n, phi=phi, raw_coeffs=c,
                       weights=tuple(-k for k in range(n + 1)), index=1,
                       extraction_residual=mismatch, cond_estimate=cond)


def generating_function_check(p: OrbitPoint, orders: int | None = None) -> dict:
    """Taylor coefficients of the shifted theta-product generating function
    against the extracted generators; returns the fitted per-order constants.

    G(z) = e^{2 pi i u - 2 pi i n g1 z^2} prod theta1(z + v_i - v_ex) /
           (theta1'(0)^n theta1(z + (n+1) v_ex));
    order j should be proportional to phi_{n-j} with a point-independent
    constant per order.
    """
    n = p.n
    orders = n if orders is None else orders
    tau = complex(p.tau)
    g1v = el.g1(tau)
    th0 = el.theta1_prime0(tau)

    def gfun(z):
        z = np.asarray(z, dtype=complex)
        num = np.ones_like(z)
        for zr in p.zeros():
            num = num * el.theta1_raw(z + zr, tau, 0)[0]
        den = th0**n * el.theta1_raw(z + p.w, tau, 0)[0]
        pref = np.exp(LAMBDA_EXPONENT_SIGN * TWO_PI_I * p.u - TWO_PI_I * n * g1v * z * z)
        return pref * num / den

    forms = extract_jacobi_forms(p)
    radius = special_safe_radius(p)
    spec = ct.ContourSpec(0.0, radius, 64)
    win = ct.laurent_window(gfun, spec, 0, orders)
    taylor = np.array([win[j] for j in range(orders + 1)])
    consts = np.array([taylor[j] / forms.phi[n - j] if j <= n else np.nan
                       for j in range(orders + 1)], dtype=complex)
    return {"taylor": taylor, "fitted_constants": consts, "forms": forms}


def verify_invariance(p: OrbitPoint, g) -> dict:
    """Compare generators at p and at act(g, p) against the expected law.

    Permutations and translations leave each phi_k fixed; a modular element
    rescales phi_k by (c tau + d)^{-k} (weight -k equivariance, measured and
    locked by the tests).
    """
    fp = extract_jacobi_forms(p)
    fq = extract_jacobi_forms(act(g, p))
    if isinstance(g, Modular):
        cd = g.c * complex(p.tau) + g.d
        expected = np.array([fp.phi[k] * cd ** (-k) for k in range(p.n + 1)])
    else:
        expected = fp.phi
    scale = float(np.max(np.abs(expected)))
    resid = float(np.max(np.abs(fq.phi - expected))) / scale
    return {"residual": resid, "phi": fp.phi, "phi_transformed": fq.phi,
            "expected": expected}
