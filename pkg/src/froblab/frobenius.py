"""Canonical coordinates, residue-formula tensors, and the WDVV certification.

Canonical coordinates are the critical values u_i = lambda(q_i); there are
n+3 of them, matching the pole degree of lambda' (order n+1 at z = 0 plus a
double pole at z = -(n+1) v_ex).  The structure constants come from the
superpotential residue formula

  c(X, Y, Z) = -sum_i res_{q_i} X(lambda) Y(lambda) Z(lambda) / lambda' dz

with the flat coordinate z of the torus as primary differential, and the
canonical metric from eta_ii = res_{q_i} dz^2/dlambda = 1/lambda''(q_i).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import elliptic as el
from . import geometry as geo
from . import orbitspace as osp
from .conventions import degree_vector
from .errors import NearDiscriminant, RootCountMismatch

TWO_PI_I = 2j * math.pi


@dataclass(frozen=True)
class CanonicalData:
    q: np.ndarray
    u_vals: np.ndarray
    second_derivs: np.ndarray
    count: int


def expected_critical_count(n: int) -> int:
    """Pole degree of lambda': (n+1) at the order-n pole plus 2 at the simple one."""
    return n + 3


def _log_deriv(z, p: osp.OrbitPoint):
    """S = lambda'/lambda and S' (vectorised); zeros of S away from the
    zeros of lambda are the critical points."""
    tau = complex(p.tau)
    s = -p.n * osp._t_ratio(z, tau) - osp._t_ratio(z + p.w, tau)
    sp = -p.n * osp._t_ratio2(z, tau) - osp._t_ratio2(z + p.w, tau)
    for zr in p.zeros():
        s = s + osp._t_ratio(z - zr, tau)
        sp = sp + osp._t_ratio2(z - zr, tau)
    return s, sp


def critical_points(p: osp.OrbitPoint, grid: int = 24, polish_tol: float = 1e-12,
                    dedup: float = 1e-4) -> CanonicalData:
    """All critical points of lambda in the fundamental cell by Newton on
    lambda'/lambda from a grid of seeds, deduplicated modulo the lattice."""
    n = p.n
    tau = complex(p.tau)
    avoid = np.concatenate([p.zeros(), p.poles()])

    a, b = np.meshgrid((np.arange(grid) + 0.5) / grid, (np.arange(grid) + 0.5) / grid)
    seeds = (a + b * tau).ravel()
    keep = np.ones(len(seeds), dtype=bool)
    for q0 in avoid:
        d = np.array([el.lattice_distance(complex(z - q0), tau) for z in seeds])
        keep &= d > osp.DELTA_GENERIC
    z = seeds[keep]

    for _ in range(60):
        s, sp = _log_deriv(z, p)
        step = s / sp
        step = np.where(np.abs(step) > 0.2, 0.2 * step / np.abs(step), step)
        z = z - step
        if float(np.max(np.abs(step))) < 1e-14:
            break

    s, _ = _log_deriv(z, p)
    z = z[np.abs(s) < 1e-9]
    # reduce into the cell and deduplicate modulo the lattice
    roots: list[complex] = []
    for zi in z:
        bb = zi.imag / tau.imag
        aa = zi.real - bb * tau.real
        zi = (aa % 1.0) + (bb % 1.0) * tau
        if any(el.lattice_distance(complex(zi - r), tau) < dedup for r in roots):
            continue
        bad = any(el.lattice_distance(complex(zi - q0), tau) < 1e-6 for q0 in avoid)
        if not bad:
            roots.append(complex(zi))
    if len(roots) != expected_critical_count(n):
        raise RootCountMismatch(len(roots), expected_critical_count(n))

    q = np.array(sorted(roots, key=lambda r: (round(r.real, 9), round(r.imag, 9))))
    # polish with true Newton on lambda'
    for _ in range(8):
        lam, lp, lpp = osp.lambda_dz(q, p)
        q = q - lp / lpp
    lam, lp, lpp = osp.lambda_dz(q, p)
    scale = float(np.max(np.abs(lam)))
    if float(np.max(np.abs(lp))) > 1e-10 * scale:
        raise RootCountMismatch(len(q), expected_critical_count(n),
                                "critical points failed to polish")
    if float(np.min(np.abs(lpp))) < 1e-8:
        raise NearDiscriminant("nearly degenerate critical point (lambda'' ~ 0)")
    u = lam
    d = np.abs(u[:, None] - u[None, :]) + np.eye(len(u))
    if float(d.min()) < 1e-8 * max(scale, 1.0):
        raise NearDiscriminant("colliding critical values")
    return CanonicalData(q=q, u_vals=u, second_derivs=lpp, count=len(q))


def eta_canonical(cd: CanonicalData) -> np.ndarray:
    """Diagonal of the canonical metric: res_{q_i} dz^2/dlambda = 1/lambda''."""
    return 1.0 / cd.second_derivs


def canonical_jacobian(p: osp.OrbitPoint, cd: CanonicalData) -> np.ndarray:
    """d u_i / d(VChart coordinate); rows i, columns the n+3 moduli."""
    return osp.lambda_grad(cd.q, p).T


def intersection_canonical_check(p: osp.OrbitPoint, cd: CanonicalData | None = None,
                                 frame: geo.Frame | None = None) -> dict:
    """Push g* to canonical coordinates: diagonal, g^ii = u_i eta^ii, and
    local constancy of det(g*_T)/prod u_i."""
    cd = cd or critical_points(p)
    fr = frame or geo.Frame(p)
    J = canonical_jacobian(p, cd)
    G = geo.intersection_form_v(p.n).mat
    g_can = J @ G @ J.T
    off = g_can - np.diag(np.diag(g_can))
    scale = float(np.max(np.abs(g_can)))
    off_resid = float(np.max(np.abs(off))) / scale

    eta_can = _saito_canonical(p, cd, fr)
    gii = np.diag(g_can)
    ratio = gii / (cd.u_vals * np.diag(eta_can))
    gii_resid = float(np.max(np.abs(ratio - 1.0)))

    det_ratio = _det_over_uprod(p, cd, fr)
    q2 = osp.point_from_vvec(p.n, p.vvec() + 2e-3 * _bump(p.n))
    cd2 = critical_points(q2)
    det_ratio2 = _det_over_uprod(q2, cd2, geo.Frame(q2))
    det_resid = abs(det_ratio / det_ratio2 - 1.0)
    return {
        "offdiag_residual": off_resid,
        "gii_residual": gii_resid,
        "det_ratio_residual": det_resid,
        "g_canonical": g_can,
        "eta_canonical_matrix": eta_can,
    }


def _bump(n: int) -> np.ndarray:
    out = np.full(n + 3, 0.7 + 0.4j)
    out[n + 2] = 0.3 + 0.1j
    return out


def _det_over_uprod(p, cd, fr) -> complex:
    g_t = fr.metric_in_chart(geo.TCHART).mat
    return complex(np.linalg.det(g_t) / np.prod(cd.u_vals))


def _saito_canonical(p: osp.OrbitPoint, cd: CanonicalData, fr: geo.Frame,
                     eta_t: np.ndarray | None = None) -> np.ndarray:
    """Pushforward of the (constant) TChart Saito matrix to canonical.

    eta_t may be passed in from the session base point: its constancy in
    TChart is certified separately, so displaced evaluations only need the
    du/dt Jacobian chain."""
    if eta_t is None:
        eta_t = geo.saito_metric(p, geo.TCHART, frame=fr).mat
    J_t = fr.t_jacobian().J
    J_can = canonical_jacobian(p, cd)
    A = J_can @ np.linalg.inv(J_t)  # d u_i / d t^alpha
    return A @ eta_t @ A.T


def structure_constants(p: osp.OrbitPoint, cd: CanonicalData | None = None,
                        frame: geo.Frame | None = None, nodes: int = 32) -> dict:
    """c_{abc} in TChart from the residue formula at the critical points."""
    cd = cd or critical_points(p)
    fr = frame or geo.Frame(p)
    n = p.n
    d = n + 3
    tau = complex(p.tau)
    Jt = fr.t_jacobian().J
    Jt_inv = np.linalg.inv(Jt)

    # radius around each critical point: stay away from the others and the
    # poles/zeros of lambda
    special = np.concatenate([p.zeros(), p.poles()])
    c = np.zeros((d, d, d), dtype=complex)
    for i, qi in enumerate(cd.q):
        r = min(el.lattice_distance(complex(qi - s), tau) for s in special)
        for j, qj in enumerate(cd.q):
            if j != i:
                r = min(r, el.lattice_distance(complex(qi - qj), tau))
        r *= 0.3
        ring = qi + r * np.exp(TWO_PI_I * np.arange(nodes) / nodes)
        lam, lp, _ = osp.lambda_dz(ring, p)
        grads = osp.lambda_grad(ring, p, lam=lam)  # (d, nodes)
        dt_lam = Jt_inv.T @ grads  # d lambda / d t^alpha at the ring
        w = (ring - qi) / lp  # quadrature weight including 1/lambda'
        c -= np.einsum("am,bm,cm,m->abc", dt_lam, dt_lam, dt_lam, w) / nodes
    sym_resid = max(
        float(np.max(np.abs(c - c.transpose(1, 0, 2)))),
        float(np.max(np.abs(c - c.transpose(0, 2, 1)))),
    ) / float(np.max(np.abs(c)))

    eta_t = geo.saito_metric(p, geo.TCHART, frame=fr).mat
    eta_cov = np.linalg.inv(eta_t)
    raised = np.einsum("cs,abs->abc", eta_t, c)  # c_ab^c
    return {"c": c, "raised": raised, "eta_t": eta_t, "eta_cov": eta_cov,
            "symmetry_residual": sym_resid, "cd": cd, "frame": fr, "Jt": Jt}


def unit_pushforward(p: osp.OrbitPoint, cd: CanonicalData, fr: geo.Frame) -> np.ndarray:
    """Components of d/dt^0 in canonical coordinates (target: all ones)."""
    Jt = fr.t_jacobian().J
    J_can = canonical_jacobian(p, cd)
    A = J_can @ np.linalg.inv(Jt)
    return A[:, 0]


def euler_pushforward(p: osp.OrbitPoint, cd: CanonicalData, fr: geo.Frame) -> np.ndarray:
    """Components of sum_a d_a t^a d/dt^a in canonical coordinates (target u_i)."""
    Jt = fr.t_jacobian().J
    J_can = canonical_jacobian(p, cd)
    A = J_can @ np.linalg.inv(Jt)
    t = fr.t_values()
    e_t = degree_vector(p.n) * t
    return A @ e_t


def wdvv_certify(p: osp.OrbitPoint, nodes: int = 32) -> dict:
    """All Frobenius-structure residuals at one point.

    Returns a dict of named residuals plus the raw tensors; the claim
    packaging lives in report.py.
    """
    n = p.n
    d = n + 3
    fr = geo.Frame(p)
    cd = critical_points(p)
    sc = structure_constants(p, cd, fr, nodes=nodes)
    c, raised, eta_t, eta_cov = sc["c"], sc["raised"], sc["eta_t"], sc["eta_cov"]
    cscale = float(np.max(np.abs(c)))

    # (a) associativity  c_ab^s c_{s c e} = c_ac^s c_{s b e}
    left = np.einsum("abs,sce->abce", raised, c)
    assoc = float(np.max(np.abs(left - left.transpose(0, 2, 1, 3)))) / max(
        float(np.max(np.abs(left))), 1e-300)

    # (b) unit axiom c_{0 b c} = eta_{b c}
    unit_resid = float(np.max(np.abs(c[0] - eta_cov))) / float(np.max(np.abs(eta_cov)))

    # (c) Euler contraction E^s c_s^{ab} = g^{ab}
    t = fr.t_values()
    degs = degree_vector(n)
    e_t = degs * t
    cup = np.einsum("as,bt,stc->abc", eta_t, eta_t, c)  # c^{ab}_c
    lhs = np.einsum("s,abs->ab", e_t, cup)
    g_t = fr.metric_in_chart(geo.TCHART).mat
    euler_resid = float(np.max(np.abs(lhs - g_t))) / float(np.max(np.abs(g_t)))

    # (d) potential consistency: F^{ab} = g^{ab}/(d_a + d_b) for pairs of
    # nonzero total degree, then d_gamma F^{ab} = eta eta c, checked in the
    # raised form d_gamma F^{AB} = c^{AB}_gamma (equivalent: eta_cov pairs
    # single slots, and lowering would need the skipped zero-degree pairs)
    cm = geo.ChartMap(p, geo.TCHART)
    x0 = fr.t_values()
    admissible = [(a, b) for a in range(d) for b in range(d) if degs[a] + degs[b] > 1e-12]
    skipped = [(a, b) for a in range(d) for b in range(d) if degs[a] + degs[b] <= 1e-12]

    def f_upper(x):
        g = cm.metric_at(x)
        out = np.zeros_like(g)
        for a, b in admissible:
            out[a, b] = g[a, b] / (degs[a] + degs[b])
        return out

    pot_resid = 0.0
    cup_scale = float(np.max(np.abs(cup)))
    for gdir in range(d):
        e = np.zeros(d)
        e[gdir] = 1.0
        _, dF, _ = geo.directional_jet(f_upper, x0, e, radius=1e-2, nodes=8)
        for a, b in admissible:
            pot_resid = max(pot_resid, abs(dF[a, b] - cup[a, b, gdir]) / cup_scale)

    # (e) semisimplicity: eigenvalues of eta^{-1} g match {u_i}
    ev = np.linalg.eigvals(np.linalg.solve(eta_t, g_t))
    ev_resid = _multiset_match(ev, cd.u_vals)
    uscale = float(np.max(np.abs(cd.u_vals)))
    dmat = np.abs(ev[:, None] - ev[None, :]) + np.eye(d) * uscale
    distinct = float(dmat.min()) / uscale

    # unit and Euler fields in canonical coordinates
    ones = unit_pushforward(p, cd, fr)
    unit_can_resid = float(np.max(np.abs(ones - 1.0)))
    eu = euler_pushforward(p, cd, fr)
    euler_can_resid = float(np.max(np.abs(eu - cd.u_vals))) / uscale

    # multiplication table in canonical coordinates: c_ij^k = delta pattern
    J_can = canonical_jacobian(p, cd)
    A = J_can @ np.linalg.inv(sc["Jt"])  # du/dt
    Ainv = np.linalg.inv(A)  # dt/du
    c_can = np.einsum("ai,bj,abc,kc->ijk", Ainv, Ainv, raised, A)
    table = np.zeros((d, d, d), dtype=complex)
    for i in range(d):
        table[i, i, i] = 1.0
    table_resid = float(np.max(np.abs(c_can - table))) / max(float(np.max(np.abs(c_can))), 1e-300)

    return {
        "associativity": assoc,
        "unit_axiom": unit_resid,
        "euler_contraction": euler_resid,
        "potential_consistency": pot_resid,
        "potential_skipped_pairs": skipped,
        "eigenvalue_match": ev_resid,
        "eigenvalue_separation": distinct,
        "unit_canonical": unit_can_resid,
        "euler_canonical": euler_can_resid,
        "multiplication_table": table_resid,
        "symmetry": sc["symmetry_residual"],
        "cd": cd,
        "structure": sc,
    }


def _multiset_match(a: np.ndarray, b: np.ndarray) -> float:
    """Greedy multiset distance, relative to the scale of b."""
    a = list(a)
    scale = float(np.max(np.abs(b)))
    worst = 0.0
    for x in b:
        j = int(np.argmin([abs(x - y) for y in a]))
        worst = max(worst, abs(x - a[j]) / scale)
        a.pop(j)
    return worst


class CanonicalChart:
    """Quasi-Newton inverse of the map moduli -> critical values."""

    def __init__(self, p: osp.OrbitPoint, cd: CanonicalData, branch_ref: complex):
        self.p0 = p
        self.n = p.n
        self.cd0 = cd
        self.branch_ref = branch_ref
        self._Jinv = np.linalg.inv(canonical_jacobian(p, cd))

    def u_of(self, vvec) -> tuple[np.ndarray, osp.OrbitPoint, CanonicalData]:
        q = osp.point_from_vvec(self.n, vvec)
        cdq = _polish_from(q, self.cd0)
        return cdq.u_vals, q, cdq

    def solve(self, target, tol=1e-12, max_iter=16):
        target = np.asarray(target, dtype=complex)
        x = self.p0.vvec().astype(complex)
        scale = max(float(np.max(np.abs(target))), 1.0)
        for _ in range(max_iter):
            u, q, cdq = self.u_of(x)
            err = target - u
            if float(np.max(np.abs(err))) < tol * scale:
                return x, q, cdq
            x = x + self._Jinv @ err
        raise NearDiscriminant("canonical chart inversion did not converge")


def darboux_egoroff_check(p: osp.OrbitPoint) -> dict:
    """Rotation-coefficient identities for the canonical Saito metric.

    beta_ij = d_j sqrt(eta_ii) / sqrt(eta_jj) with the covariant diagonal
    eta_ii and honest canonical-coordinate derivatives (Newton inversion of
    u(moduli), not frozen directional lines: the identities involve second
    canonical derivatives).  Checks d_k beta_ij = beta_ik beta_kj for
    distinct (i,j,k) and sum_k d_k beta_ij = 0.
    """
    d = p.n + 3
    fr = geo.Frame(p)
    cd = critical_points(p)
    branch = complex(fr.forms().phi[p.n])
    eta_t = geo.saito_metric(p, geo.TCHART, frame=fr).mat
    base_s = _sqrt_eta_cov(p, cd, fr, ref=None, eta_t=eta_t)
    chart = CanonicalChart(p, cd, branch)
    u0 = cd.u_vals

    def s_field(uvec):
        _, q, cdq = chart.solve(uvec)
        frq = geo.Frame(q, branch_ref=branch)
        return _sqrt_eta_cov(q, cdq, frq, ref=base_s, eta_t=eta_t)

    uscale = float(np.max(np.abs(u0)))
    radius = 1e-2 * uscale
    nnodes = 8

    def jet2(direction):
        d1 = np.zeros(d, dtype=complex)
        d2 = np.zeros(d, dtype=complex)
        for j in range(nnodes):
            w = radius * np.exp(TWO_PI_I * j / nnodes)
            fj = s_field(u0 + w * direction)
            d1 += fj * np.exp(-TWO_PI_I * j / nnodes)
            d2 += fj * np.exp(-2 * TWO_PI_I * j / nnodes)
        return d1 / (nnodes * radius), 2.0 * d2 / (nnodes * radius**2)

    s0 = base_s
    ds = np.zeros((d, d), dtype=complex)  # ds[k, i] = d_k s_i
    dds = np.zeros((d, d, d), dtype=complex)  # dds[k, l, i]
    singles = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        d1, d2 = jet2(e)
        ds[k] = d1
        dds[k, k] = d2
        singles.append(d2)
    for k in range(d):
        for l in range(k + 1, d):
            e = np.zeros(d)
            e[k] = 1.0
            e[l] = 1.0
            _, d2 = jet2(e)
            mixed = 0.5 * (d2 - singles[k] - singles[l])
            dds[k, l] = mixed
            dds[l, k] = mixed

    beta = np.zeros((d, d), dtype=complex)
    dbeta = np.zeros((d, d, d), dtype=complex)  # dbeta[k, i, j]
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            beta[i, j] = ds[j, i] / s0[j]
            for k in range(d):
                dbeta[k, i, j] = dds[k, j, i] / s0[j] - ds[j, i] * ds[k, j] / s0[j] ** 2

    bscale = float(np.max(np.abs(beta))) ** 2
    main = 0.0
    for i in range(d):
        for j in range(d):
            for k in range(d):
                if len({i, j, k}) < 3:
                    continue
                main = max(main, abs(dbeta[k, i, j] - beta[i, k] * beta[k, j]) / bscale)
    total = 0.0
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            total = max(total, abs(np.sum(dbeta[:, i, j])) / bscale)
    return {"rotation_residual": main, "translation_residual": total, "beta": beta}


def _polish_from(q: osp.OrbitPoint, cd: CanonicalData) -> CanonicalData:
    """Re-polish the critical points of a displaced point from known ones."""
    z = cd.q.copy()
    for _ in range(12):
        lam, lp, lpp = osp.lambda_dz(z, q)
        z = z - lp / lpp
    lam, lp, lpp = osp.lambda_dz(z, q)
    return CanonicalData(q=z, u_vals=lam, second_derivs=lpp, count=len(z))


def _sqrt_eta_cov(p, cd, fr, ref, eta_t=None):
    """sqrt of the covariant canonical Saito diagonal, branch-tracked to ref."""
    eta_can = _saito_canonical(p, cd, fr, eta_t=eta_t)
    diag = 1.0 / np.diag(eta_can)  # covariant diagonal
    s = np.sqrt(diag)
    if ref is not None:
        flip = np.abs(s - ref) > np.abs(s + ref)
        s = np.where(flip, -s, s)
    return s
