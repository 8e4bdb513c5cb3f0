"""Analytic radial multipliers and quadrature verification of kernel
identities: g, ell^lambda, g^lambda, the diagonal kernel m^lambda, the
replacement gap, the weak-coupling norm, momentum-region predicates, the
integral-bound suite and the nuisance integrand.

All momentum-space quadratures here default to the wide analytic
mollifier; the mollifier only enters O(gamma^2) corrections, and a
narrow one would inflate them.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .kernels import ANALYTIC_MOLLIFIER
from .polymer import CouplingSchedule
from .rng import substream


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


# ---------------------------------------------------------------------------
# scalar multipliers


def g_of(y):
    """g(y) = sqrt(4 pi y + 1) - 1; satisfies dg/dy = 2 pi / (1 + g)."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("g_of requires y >= 0")
    out = np.sqrt(4.0 * np.pi * y + 1.0) - 1.0
    return out if out.ndim else float(out)

def ell_lambda(y, lam, gamma):
    """ell^lambda(y) = gamma^2 log(1 + 1/(lambda + y)), decreasing in y."""
    y = np.asarray(y, dtype=float)
    out = gamma**2 * np.log1p(1.0 / (lam + y))
    return out if out.ndim else float(out)


def gamma_weak_lambda(lam, alpha):
    return CouplingSchedule.weak_lambda(alpha, lam).gamma


def _pnorm(p):
    p = np.asarray(p, dtype=float)
    if p.ndim and p.shape[-1] == 2:
        return np.sqrt(np.sum(p * p, axis=-1))
    return p


def g_lambda(p, lam, alpha):
    """g^lambda(p) = g(ell^lambda(|p|^2 / 2)) with gamma tied to lambda;
    p may be a 2-vector or |p| directly."""
    r = _pnorm(p)
    gamma = gamma_weak_lambda(lam, alpha)
    return g_of(ell_lambda(0.5 * np.asarray(r, dtype=float) ** 2, lam, gamma))


@dataclass(frozen=True)
class RadialMultiplier:
    """Tabulated radial function with monotone-cubic interpolation in
    log|p|; constant extension outside [p_min, p_max]."""

    lam: float
    alpha: float
    p_grid: np.ndarray
    values: np.ndarray

    @classmethod
    def from_function(cls, fn, lam, alpha, p_min=1e-6, p_max=1e3,
                      n_points=400):
        p_grid = np.geomspace(p_min, p_max, n_points)
        return cls(lam=lam, alpha=alpha, p_grid=p_grid,
                   values=np.asarray(fn(p_grid), dtype=float))

    @classmethod
    def g_table(cls, lam, alpha, **kw):
        return cls.from_function(lambda r: g_lambda(r, lam, alpha),
                                 lam, alpha, **kw)

    def __call__(self, p):
        r = np.clip(_pnorm(p), self.p_grid[0], self.p_grid[-1])
        interp = PchipInterpolator(np.log(self.p_grid), self.values)
        out = interp(np.log(r))
        return out if np.ndim(out) else float(out)

    def refined(self):
        """Same table at twice the density (for convergence checks)."""
        dense = np.geomspace(self.p_grid[0], self.p_grid[-1],
                             2 * len(self.p_grid))
        interp = PchipInterpolator(np.log(self.p_grid), self.values)
        return RadialMultiplier(self.lam, self.alpha, dense,
                                interp(np.log(dense)))


# ---------------------------------------------------------------------------
# momentum regions


def region_indicator(kind, kappa, p, q):
    """bulk(p, q) = 1 iff |p+q| >= kappa |q| (note the asymmetry in (p, q));
    nuisance is the complement, full is identically 1."""
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0,1)")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if kind == "full":
        return np.ones(np.broadcast_shapes(p.shape[:-1], q.shape[:-1]),
                       dtype=np.int8) if p.ndim > 1 or q.ndim > 1 else 1
    s = np.sqrt(np.sum((p + q) ** 2, axis=-1))
    qn = np.sqrt(np.sum(q * q, axis=-1))
    bulk = (s >= kappa * qn).astype(np.int8)
    if kind == "bulk":
        out = bulk
    elif kind == "nuisance":
        out = (1 - bulk).astype(np.int8)
    else:
        raise ValueError(f"unknown region kind {kind!r}")
    return out if np.ndim(out) else int(out)


# ---------------------------------------------------------------------------
# quadrature helpers


def _gauss_panels(edges, n_gauss=12):
    """Gauss-Legendre nodes/weights on consecutive panels given by edges."""
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    lo = edges[:-1, None]
    hi = edges[1:, None]
    nodes = 0.5 * (hi + lo) + 0.5 * (hi - lo) * xg[None, :]
    weights = 0.5 * (hi - lo) * wg[None, :]
    return nodes.ravel(), weights.ravel()


def _unit01_clustered(n_panels=40, n_gauss=8, tiny=1e-14):
    """Quadrature on (0,1] with panels geometrically clustered at 0."""
    edges = np.concatenate([[0.0], np.geomspace(tiny, 1.0, n_panels)])
    return _gauss_panels(edges, n_gauss)


def _m_lambda_radial_edges(pnorm, lam, n_coarse, s, kappa):
    hi = 14.0 / s
    edges = list(np.geomspace(1e-7, hi, n_coarse))
    if 0 < pnorm < hi:
        # refine around the shell r ~ |p| where the denominator dips
        # kinks of the angular cut phi*(r) sit at r = p(1 -+ kappa)
        for f in (0.25, 0.5, 1.0 - kappa, 0.9, 1.0, 1.1, 1.0 + kappa,
                  1.5, 2.0):
            edges.append(pnorm * f)
    return np.unique(np.clip(np.array(edges), 1e-7, hi))


def _m_lambda_once(pnorm, lam, alpha, region, kappa, mollifier,
                   n_coarse, n_ang, gtab=None):
    gamma = gamma_weak_lambda(lam, alpha)
    gfun = gtab if gtab is not None else (lambda r: g_lambda(r, lam, alpha))

    if pnorm == 0.0:
        # rotational-average limit: cos^2 -> 1/2, bulk indicator trivial
        if region == "nuisance":
            return 0.0
        r, w = _gauss_panels(np.geomspace(1e-9, 14.0 / mollifier.s,
                                          2 * n_coarse), 12)
        a = 0.5 * r * r
        den = lam + a * (1.0 + gfun(r))
        return float(2.0 * gamma**2 * np.pi *
                     np.sum(w * r * mollifier.v_hat_radial(r) / den))

    edges = _m_lambda_radial_edges(pnorm, lam, n_coarse, mollifier.s, kappa)
    r, wr = _gauss_panels(edges, 12)
    vr = r * mollifier.v_hat_radial(r) * wr

    # bulk cut in the angle phi between q and p:
    #   |p+q|^2 = P^2 + r^2 + 2 P r cos(phi) >= kappa^2 P^2
    P = pnorm
    cstar = (kappa**2 * P**2 - P**2 - r**2) / (2.0 * P * r)
    phi_star = np.arccos(np.clip(cstar, -1.0, 1.0))

    xg, wgx = np.polynomial.legendre.leggauss(n_ang)
    xg = 0.5 * (xg + 1.0)
    wgx = 0.5 * wgx

    total = 0.0
    if region in ("bulk", "full"):
        phi = phi_star[:, None] * xg[None, :]
        wphi = phi_star[:, None] * wgx[None, :]
        a = P**2 + r[:, None] ** 2 + 2.0 * P * r[:, None] * np.cos(phi)
        den = lam + 0.5 * a * (1.0 + gfun(np.sqrt(a)))
        total += np.sum(vr[:, None] * wphi * np.cos(phi) ** 2 / den)
    if region in ("nuisance", "full"):
        # psi = pi - phi in (0, pi - phi*], clustered at 0 where the
        # denominator dips to lambda on the shell r = P
        span = np.pi - phi_star
        y, wy = _unit01_clustered()
        psi = span[:, None] * y[None, :]
        wpsi = span[:, None] * wy[None, :]
        phi = np.pi - psi
        a = P**2 + r[:, None] ** 2 + 2.0 * P * r[:, None] * np.cos(phi)
        a = np.maximum(a, 0.0)
        den = lam + 0.5 * a * (1.0 + gfun(np.sqrt(a)))
        total += np.sum(vr[:, None] * wpsi * np.cos(phi) ** 2 / den)
    # factor 2: phi-reflection symmetry
    return float(2.0 * gamma**2 * 2.0 * total)


def m_lambda(p, lam, alpha, region="bulk", kappa=1.0 / 3.0,
             mollifier=ANALYTIC_MOLLIFIER, rtol=1e-4, max_level=4, gtab=None):
    """Diagonal kernel
        m^lambda(p) = 2 gamma^2 int V_hat(q) region(q, p) cos^2(theta)
                       / (lambda + |p+q|^2 (1 + g^lambda(p+q)) / 2) dq
    (theta = angle between q and p) by adaptive polar quadrature.
    Returns (value, error_estimate)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    pnorm = float(_pnorm(p))
    n_coarse, n_ang = 24, 32
    prev = _m_lambda_once(pnorm, lam, alpha, region, kappa, mollifier,
                          n_coarse, n_ang, gtab)
    for _ in range(max_level):
        n_coarse *= 2
        n_ang *= 2
        cur = _m_lambda_once(pnorm, lam, alpha, region, kappa, mollifier,
                             n_coarse, n_ang, gtab)
        err = abs(cur - prev)
        scale = max(abs(cur), gamma_weak_lambda(lam, alpha) ** 2)
        if err <= rtol * scale:
            return cur, err
        prev = cur
    raise QuadratureError("m_lambda refinement budget exhausted")


def replacement_gap(lam, alpha, p_grid=None, **kw):
    """sup_p |m^lambda(p) - g^lambda(p)| over a log-spaced grid (plus
    p = 0), and its ratio to gamma^2."""
    if p_grid is None:
        p_grid = np.concatenate([[0.0], np.geomspace(1e-3, 60.0, 44)])
    if len(p_grid) < 40:
        raise ValueError("p_grid must have at least 40 points")
    gamma2 = gamma_weak_lambda(lam, alpha) ** 2
    gaps = []
    for pn in p_grid:
        mv, _ = m_lambda(pn, lam, alpha, **kw)
        gaps.append(abs(mv - float(g_lambda(pn, lam, alpha))))
    gaps = np.array(gaps)
    k = int(np.argmax(gaps))
    return {"lam": lam, "alpha": alpha, "sup_gap": float(gaps[k]),
            "sup_gap_over_gamma2": float(gaps[k] / gamma2) if gamma2 else 0.0,
            "argmax_p": float(p_grid[k])}


def weak_norm(lam, alpha=None, gamma=None, mollifier=ANALYTIC_MOLLIFIER):
    """||(lambda+S)^{-1/2} gamma f_1||^2, normalized so that under the
    weak-coupling schedule the lambda -> 0 limit is alpha^2:

        gamma^2 \\int_0^inf r V_hat(r) / (lambda + r^2/2) dr.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if gamma is None:
        if alpha is None:
            raise ValueError("pass alpha or gamma")
        gamma = gamma_weak_lambda(lam, alpha)
    if gamma == 0.0:
        return 0.0

    def integrand(u):
        y = math.exp(u)
        return y * mollifier.v_hat_radial(math.sqrt(2.0 * y)) / (lam + y)

    lo = math.log(lam) - 30.0
    hi = math.log(800.0 / mollifier.s**2)
    val, err = integrate.quad(integrand, lo, hi, limit=400, epsrel=1e-10)
    if err > 1e-6 * abs(val):
        raise QuadratureError("weak_norm quadrature did not converge")
    return gamma**2 * val


# ---------------------------------------------------------------------------
# mixture importance sampling for the integral-bound suite


def _sample_mixture(rng, size, centers, lims):
    """Sample from an equal-weight mixture of log-radial clouds.

    centers: (k, 2); lims: (k, 2) of (r_min, r_max).  Returns points
    (size, 2) and the mixture density at each point.
    """
    centers = np.asarray(centers, dtype=float)
    lims = np.asarray(lims, dtype=float)
    k = len(centers)
    comp = rng.integers(0, k, size)
    u = rng.random(size)
    r = lims[comp, 0] * (lims[comp, 1] / lims[comp, 0]) ** u
    ang = rng.random(size) * 2.0 * np.pi
    pts = centers[comp] + r[:, None] * np.stack(
        [np.cos(ang), np.sin(ang)], axis=-1)
    dens = np.zeros(size)
    for j, (c, (a, b)) in enumerate(zip(centers, lims)):
        d2 = np.sum((pts - c) ** 2, axis=-1)
        # the recomputed distance to a point's own center cancels
        # catastrophically when r << |c|; the sampled radius is exact
        d2 = np.where(comp == j, r * r, d2)
        inside = (d2 >= a * a * (1.0 - 1e-9)) & (d2 <= b * b * (1.0 + 1e-9))
        dens += inside / (2.0 * np.pi * np.log(b / a) * np.maximum(d2, a * a))
    return pts, dens / k


def _mc_mean(values):
    m = float(np.mean(values))
    se = float(np.std(values) / math.sqrt(len(values)))
    return m, se


def _prefactored_resolvent_value(lam, p, r_vec, rng, n_samples, mollifier):
    pn = float(np.hypot(*p))
    q, dens = _sample_mixture(rng, n_samples,
                              [(0.0, 0.0), tuple(-r_vec)],
                              [(1e-8, 14.0 / mollifier.s)] * 2)
    qr = np.sqrt(np.sum((q + r_vec) ** 2, axis=-1))
    f = pn * mollifier.v_hat(q) / (np.maximum(qr, 1e-300)
                                   * (lam + np.sum(q * q, axis=-1) + pn**2))
    return _mc_mean(f / dens)


def _nuisance_pair_value(lam, r_vec, kappa, rng, n_samples, mollifier,
                         alpha=1.0):
    gamma2 = gamma_weak_lambda(lam, alpha) ** 2
    p, dens_p = _sample_mixture(rng, n_samples, [(0.0, 0.0)],
                                [(1e-8, 14.0 / mollifier.s)])
    pn = np.sqrt(np.sum(p * p, axis=-1))
    # u = p + q lives in the nuisance disc |u| < kappa |p|; the second
    # mixture component targets the resolvent spike at u = -r
    b_u = kappa * 14.0 / mollifier.s
    u, dens_u = _sample_mixture(rng, n_samples,
                                [(0.0, 0.0), tuple(-r_vec)],
                                [(1e-9, b_u)] * 2)
    un = np.sqrt(np.sum(u * u, axis=-1))
    nuis = un < kappa * pn
    q = u - p
    num = mollifier.v_hat(p) * mollifier.v_hat(q) * un * nuis
    rn2 = float(np.sum(r_vec * r_vec))
    den = ((lam + np.sum((u + r_vec) ** 2, axis=-1))
           * (lam + np.sum(q * q, axis=-1) + rn2) ** 1.5)
    f = gamma2 * num / den
    return _mc_mean(f / (dens_p * dens_u))


def _double_resolvent_value(lam, q_vec, r_vec, rng, n_samples, mollifier):
    p, dens = _sample_mixture(
        rng, n_samples,
        [(0.0, 0.0), tuple(-q_vec), tuple(-r_vec)],
        [(1e-8, 14.0 / mollifier.s)] * 3)
    f = lam * mollifier.v_hat(p) / (
        (lam + np.sum((p + q_vec) ** 2, axis=-1))
        * (lam + np.sum((p + r_vec) ** 2, axis=-1)))
    return _mc_mean(f / dens)


def _shifted_resolvent_value(lam, q_vec, rng, n_samples, mollifier, alpha=1.0):
    gamma2 = gamma_weak_lambda(lam, alpha) ** 2
    p, dens = _sample_mixture(rng, n_samples,
                              [(0.0, 0.0), tuple(-q_vec)],
                              [(1e-8, 14.0 / mollifier.s)] * 2)
    f = gamma2 * mollifier.v_hat(p) / (
        lam + 0.5 * np.sum((p + q_vec) ** 2, axis=-1))
    return _mc_mean(f / dens)


def _random_vec(rng):
    r = 10.0 ** rng.uniform(-4, 4)
    ang = rng.random() * 2.0 * np.pi
    return np.array([r * np.cos(ang), r * np.sin(ang)])


def lemma_suite(n_draws=1000, seed=0, n_samples=20000, threshold=50.0,
                kappa=1.0 / 3.0, mollifier=ANALYTIC_MOLLIFIER):
    """Sweep the four uniform integral bounds over random parameters
    (lambda log-uniform in [1e-8, 1], momenta log-uniform in [1e-4, 1e4])
    and report the maximum observed value of each left-hand side."""
    if n_draws < 1000:
        raise ValueError("need at least 10^3 draws")
    report = {}
    specs = {
        "prefactored_resolvent_bound":            # |p| int V(q)/(|q+r|(...))
            lambda lam, rng: _prefactored_resolvent_value(
                lam, _random_vec(rng), _random_vec(rng), rng, n_samples,
                mollifier),
        "nuisance_pair_bound":                    # gamma^2 double integral
            # the double integral has the heaviest-tailed weights of the
            # four; oversample to keep nearly every draw converged
            lambda lam, rng: _nuisance_pair_value(
                lam, _random_vec(rng), kappa, rng, 16 * n_samples,
                mollifier),
        "double_resolvent_bound":                 # lambda int V/((...)(...))
            lambda lam, rng: _double_resolvent_value(
                lam, _random_vec(rng), _random_vec(rng), rng, n_samples,
                mollifier),
        "shifted_resolvent_bound":                # gamma^2 int V/(l+|q+p|^2/2)
            lambda lam, rng: _shifted_resolvent_value(
                lam, _random_vec(rng), rng, n_samples, mollifier),
    }
    for j, (name, fn) in enumerate(specs.items()):
        max_val = -np.inf
        max_half = -np.inf
        argmax_lam = None
        bad = 0
        for d in range(n_draws):
            rng = substream(seed, j, d)
            lam = 10.0 ** rng.uniform(-8, 0)
            val, se = fn(lam, rng)
            if se > 0.05 * (abs(val) + 0.1):
                bad += 1
            if val > max_val:
                max_val = val
                argmax_lam = lam
            if d < n_draws // 2 and val > max_half:
                max_half = val
        report[name] = {
            "n_draws": n_draws,
            "max_value": float(max_val),
            "max_first_half": float(max_half),
            "argmax_lambda": float(argmax_lam),
            "nonconverged_fraction": bad / n_draws,
            "threshold": threshold,
            "pass": bool(max_val <= threshold and bad <= 0.01 * n_draws),
            "seed": seed,
        }
    return report


# ---------------------------------------------------------------------------
# nuisance integrand (chaos n = 2: a single tail momentum p3)


def _nuisance_terms(p1, p2, p3, lam, alpha, kappa, mollifier):
    """Common factor and the two near-cancelling terms of the nuisance
    integrand, evaluated pointwise (arrays of shape (N, 2))."""
    p3 = np.broadcast_to(np.asarray(p3, dtype=float), p1.shape)
    n1 = np.sqrt(np.sum(p1 * p1, axis=-1))
    n2 = np.sqrt(np.sum(p2 * p2, axis=-1))
    n3 = np.sqrt(np.sum(p3 * p3, axis=-1))
    w23 = p2 + p3
    w13 = p1 + p3
    tot = p1 + p2 + p3
    gamma = gamma_weak_lambda(lam, alpha)

    ind_N1 = region_indicator("nuisance", kappa, p1, w23)
    ind_B2 = region_indicator("bulk", kappa, p2, p3)
    common = (gamma**2 * mollifier.v_hat(p1) * mollifier.v_hat(p2)
              / (n1 * n2 * n3)
              * ind_N1 * ind_B2
              / ((lam + np.sum(tot * tot, axis=-1))
                 * np.sqrt(lam + n2**2 + n3**2)))

    g23 = g_of(ell_lambda(0.5 * np.sum(w23 * w23, axis=-1), lam, gamma))
    t1 = (np.sum(p1 * w23, axis=-1) * np.sum(p2 * p3, axis=-1)
          / (lam + 0.5 * np.sum(w23 * w23, axis=-1) * (1.0 + g23)))

    ind_N2 = region_indicator("nuisance", kappa, p2, w13)
    ind_B1 = region_indicator("bulk", kappa, p1, p3)
    g13 = g_of(ell_lambda(0.5 * np.sum(w13 * w13, axis=-1), lam, gamma))
    t2 = (ind_N2 * ind_B1
          * np.sum(p2 * w13, axis=-1) * np.sum(p1 * p3, axis=-1)
          / (lam + 0.5 * np.sum(w13 * w13, axis=-1) * (1.0 + g13)))
    return common, t1, t2


def nuisance_I(p3, lam, alpha=1.0, quad_samples=100000, seed=0,
               kappa=1.0 / 3.0, mollifier=ANALYTIC_MOLLIFIER):
    """Monte Carlo estimate (value, stderr) of the nuisance integrand
    I(p3) with the near-cancelling two-term absolute value.

    Importance sampling: p2 log-radial around 0; p1 = v - (p2 + p3) with
    v log-radial inside the nuisance disc |v| < kappa |p2 + p3|.
    """
    if quad_samples < 100000:
        raise ValueError("need at least 1e5 samples")
    p3 = np.asarray(p3, dtype=float)
    rng = substream(seed, 7)
    n = int(quad_samples)

    p2, dens2 = _sample_mixture(rng, n,
                                [(0.0, 0.0), tuple(-p3)],
                                [(1e-6, 14.0 / mollifier.s)] * 2)
    w23 = p2 + p3[None, :]
    b = kappa * np.sqrt(np.sum(w23 * w23, axis=-1))
    lo = np.minimum(1e-9, 1e-6 * b)
    vrad = lo * (b / lo) ** rng.random(n)
    vang = rng.random(n) * 2.0 * np.pi
    v = vrad[:, None] * np.stack([np.cos(vang), np.sin(vang)], axis=-1)
    densv = 1.0 / (2.0 * np.pi * np.log(b / lo) * vrad**2)
    p1 = v - w23

    common, t1, t2 = _nuisance_terms(p1, p2, p3, lam, alpha, kappa, mollifier)
    f = common * np.abs(t1 + t2) / (dens2 * densv)
    return _mc_mean(f)
