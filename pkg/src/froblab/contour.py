"""Circle-quadrature engine: Laurent coefficients, residues, Cauchy derivatives.

One rule everywhere: uniform trapezoid quadrature on a circle, which is
spectrally accurate for integrands analytic in an annulus around it.
Convergence is certified by node doubling (16 -> ... -> 4096); if doubling
still moves the answer by more than 1e-9 relative, NonConvergent is raised.

Fractional powers of a zero-free function on the circle are continued along
the sampled nodes by cumulative-argument tracking, anchored at the principal
branch of h(0).  Any net winding of h around 0 is a BranchObstruction, never
a silent sheet switch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchObstruction, NonConvergent

_REL_STOP = 1e-9
_MAX_SAMPLES = 4096


@dataclass(frozen=True)
class ContourSpec:
    """Circle |z - center| = radius sampled at `samples` uniform nodes."""

    center: complex = 0.0
    radius: float = 0.1
    samples: int = 64

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.samples < 16 or self.samples & (self.samples - 1):
            raise ValueError("samples must be a power of two >= 16")

    def nodes(self, m: int | None = None) -> np.ndarray:
        m = m or self.samples
        ang = 2.0 * math.pi * np.arange(m) / m
        return self.center + self.radius * np.exp(1j * ang)


@dataclass(frozen=True)
class LaurentWindow:
    """Laurent coefficients c_k for order_min <= k <= order_max at a center."""

    coeffs: dict
    order_min: int
    order_max: int
    consistency_residual: float

    def __getitem__(self, k: int) -> complex:
        return self.coeffs[k]


def _eval_nodes(f, zs: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(f(zs), dtype=complex)
        if vals.shape == zs.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([f(complex(z)) for z in zs], dtype=complex)  # scalar-only callable


def _coeff_from_samples(vals: np.ndarray, spec: ContourSpec, k: int) -> complex:
    m = len(vals)
    ang = 2.0 * math.pi * np.arange(m) / m
    ring = spec.radius * np.exp(1j * ang)
    # c_k = (1/2 pi i) oint f (z-c)^{-k-1} dz = mean of f * ring^{-k}
    return complex(np.mean(vals * ring ** (-k)))


def laurent_coeff(f, spec: ContourSpec, k: int) -> complex:
    """Laurent coefficient c_k of f around spec.center by trapezoid rule.

    The doubling test is relative to max(|c_k|, 1e-3 * natural scale), the
    natural scale being max|f| on the circle times radius^-k; coefficients
    that are exactly zero then still converge.
    """
    m = spec.samples
    vals = _eval_nodes(f, spec.nodes(m))
    prev = _coeff_from_samples(vals, spec, k)
    while m < _MAX_SAMPLES:
        m *= 2
        vals = _eval_nodes(f, spec.nodes(m))
        cur = _coeff_from_samples(vals, spec, k)
        fscale = float(np.max(np.abs(vals))) * spec.radius ** (-k)
        scale = max(abs(cur), abs(prev), 1e-3 * fscale, 1e-30)
        if abs(cur - prev) <= _REL_STOP * scale:
            return cur
        prev = cur
    raise NonConvergent(
        f"laurent_coeff(k={k}) did not stabilise at {_MAX_SAMPLES} nodes "
        f"(last change {abs(cur - prev):.3e})"
    )


def laurent_window(f, spec: ContourSpec, order_min: int, order_max: int) -> LaurentWindow:
    """All coefficients in one sweep, sharing the sampled values.

    consistency_residual reports the size of the coefficient one order below
    order_min relative to the largest extracted coefficient: for a function
    whose pole order really is -order_min it should be noise.
    """
    m = spec.samples
    vals = _eval_nodes(f, spec.nodes(m))
    prev = {k: _coeff_from_samples(vals, spec, k) for k in range(order_min - 1, order_max + 1)}
    while m < _MAX_SAMPLES:
        m *= 2
        vals = _eval_nodes(f, spec.nodes(m))
        cur = {k: _coeff_from_samples(vals, spec, k) for k in range(order_min - 1, order_max + 1)}
        fmax = float(np.max(np.abs(vals)))
        scale = max(
            max(abs(v) for v in cur.values()),
            1e-3 * fmax * spec.radius ** (-order_min),
            1e-30,
        )
        if all(abs(cur[k] - prev[k]) <= _REL_STOP * scale for k in cur):
            below = abs(cur[order_min - 1]) / scale
            cur.pop(order_min - 1)
            return LaurentWindow(cur, order_min, order_max, below)
        prev = cur
    raise NonConvergent(f"laurent_window did not stabilise at {_MAX_SAMPLES} nodes")


def residue(f, spec: ContourSpec) -> complex:
    """res f = c_{-1}."""
    return laurent_coeff(f, spec, -1)


def _continued_power(vals: np.ndarray, value_at_center: complex, exponent: float) -> np.ndarray:
    """vals**exponent with the branch continued along the node sequence.

    The branch is anchored so the argument of the first node is the one
    reached by continuation from the principal argument of value_at_center;
    a nonzero net winding of vals around 0 raises BranchObstruction.
    """
    args = np.angle(vals)
    d = np.diff(np.concatenate([args, args[:1]]))
    d = (d + math.pi) % (2.0 * math.pi) - math.pi
    winding = float(np.sum(d)) / (2.0 * math.pi)
    if abs(winding) > 0.25:
        raise BranchObstruction(
            f"integrand winds {winding:.3f} times around 0 on the contour"
        )
    cont = args[0] + np.concatenate([[0.0], np.cumsum(d[:-1])])
    # anchor node 0 to the sheet of the principal branch at the center
    base = np.angle(value_at_center)
    shift = 2.0 * math.pi * round((base - args[0]) / (2.0 * math.pi))
    cont = cont + shift
    return np.abs(vals) ** exponent * np.exp(1j * exponent * cont)


def fractional_power_residue(h, n_root: int, power_num: int, spec: ContourSpec) -> complex:
    """res_{z=0} z^{-power_num} h(z)^{power_num/n_root} dz.

    For lambda(z) = z^{-n_root} h(z) with h analytic and zero-free near 0
    this is res lambda^{power_num/n_root} on the branch with
    lambda^{1/n_root} ~ h(0)^{1/n_root} / z (principal root of h(0)).
    """
    if spec.center != 0:
        raise ValueError("fractional_power_residue expects a circle centred at 0")
    p = float(power_num) / float(n_root)
    h0 = complex(h(np.array([0.0 + 0.0j], dtype=complex))[0]) if _is_vec(h) else complex(h(0.0))
    if h0 == 0:
        raise BranchObstruction("h(0) = 0: no zero-free branch at the center")

    def run(m):
        zs = spec.nodes(m)
        vals = _eval_nodes(h, zs)
        powed = _continued_power(vals, h0, p)
        # res of z^{-power_num} h^{p}: coefficient c_{power_num - 1} of h^p
        ring = spec.radius * np.exp(1j * 2.0 * math.pi * np.arange(m) / m)
        return complex(np.mean(powed * ring ** (-(power_num - 1))))

    m = spec.samples
    prev = run(m)
    fscale = abs(h0) ** p * spec.radius ** (-(power_num - 1))
    while m < _MAX_SAMPLES:
        m *= 2
        cur = run(m)
        if abs(cur - prev) <= _REL_STOP * max(abs(cur), abs(prev), 1e-3 * fscale, 1e-30):
            return cur
        prev = cur
    raise NonConvergent("fractional_power_residue did not stabilise")


def _is_vec(f) -> bool:
    try:
        out = f(np.array([1e-3 + 0j, 2e-3 + 0j]))
        return np.asarray(out).shape == (2,)
    except Exception:
        return False


def cauchy_derivative(f, at: complex, order: int, radius: float = 1e-2,
                      samples: int = 32) -> complex:
    """order! * c_order of w -> f(at + w); exact for holomorphic f."""
    spec = ContourSpec(center=0.0, radius=radius, samples=samples)
    c = laurent_coeff(lambda w: f(at + w), spec, order)
    return math.factorial(order) * c
