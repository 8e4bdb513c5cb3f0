"""Chaos-1 closed forms, the weighted-measure importance sampler, the
limiting-diffusivity pairing and the off-diagonal pairing that separates
the self-repelling polymer from its divergence-free companion model.

Momentum-space norms use the same normalization as spectral.weak_norm:
||f||^2 on one-particle kernels is 4 pi int |f(p)|^2 V_hat(p)/|p|^2 dp,
fixed so that the weak-coupling resolvent norm of gamma f_1 tends to
alpha^2.  The two-particle measure enters the off-diagonal pairing as
prod V_hat(p_i)/|p_i|^2 dp (without the symmetry factorial, which is
handled explicitly where needed).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .kernels import ANALYTIC_MOLLIFIER
from .rng import substream
from .spectral import (QuadratureError, ell_lambda, g_of, gamma_weak_lambda,
                       weak_norm)


def sigma2(alpha):
    """Limiting diffusivity enhancement sqrt(4 pi alpha^2 + 1) - 1."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return math.sqrt(4.0 * math.pi * alpha**2 + 1.0) - 1.0


def varsigma2(alpha):
    """Total limiting diffusivity 1 + sigma2(alpha)."""
    return 1.0 + sigma2(alpha)


@dataclass(frozen=True)
class MuSampler:
    """Importance sampler for the weighted momentum measure
    prod_i V_hat(p_i)/|p_i|^2 dp_i on an annulus.

    Each coordinate has radius log-uniform on [r_min, r_max] (density
    1/(2 pi log(r_max/r_min) r^2) on the plane) and uniform angle, so the
    1/|p|^2 weight is absorbed exactly by the proposal.
    """

    n: int
    r_min: float = 1e-6
    r_max: float = 50.0
    mollifier: object = field(default=ANALYTIC_MOLLIFIER)

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")

    @property
    def log_range(self):
        return math.log(self.r_max / self.r_min)

    def plane_density(self, r):
        """Proposal density of one coordinate at radius r."""
        r = np.asarray(r, dtype=float)
        inside = (r >= self.r_min) & (r <= self.r_max)
        return inside / (2.0 * np.pi * self.log_range * r**2)

    def sample(self, n_samples, rng):
        """Returns (points, weights): points (n_samples, n, 2) and
        per-sample importance weights prod_i [V_hat/|p|^2] / q."""
        u = rng.random((n_samples, self.n))
        r = self.r_min * (self.r_max / self.r_min) ** u
        ang = rng.random((n_samples, self.n)) * 2.0 * np.pi
        pts = r[..., None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        # V_hat/|p|^2 over q(p) = V_hat * 2 pi log_range (radial part cancels)
        w = np.prod(self.mollifier.v_hat_radial(r), axis=-1) \
            * (2.0 * np.pi * self.log_range) ** self.n
        return pts, w

    def estimate(self, f, n_samples, seed, batch=200000):
        """Unbiased (value, stderr) for int f(p_1..p_n) prod V_hat/|p|^2 dp."""
        total = 0.0
        total2 = 0.0
        count = 0
        k = 0
        while count < n_samples:
            m = min(batch, n_samples - count)
            rng = substream(seed, 11, k)
            pts, w = self.sample(m, rng)
            vals = f(pts) * w
            total += float(np.sum(vals))
            total2 += float(np.sum(vals**2))
            count += m
            k += 1
        mean = total / count
        var = max(total2 / count - mean**2, 0.0)
        return mean, math.sqrt(var / count)


@dataclass(frozen=True)
class ChaosOneKernel:
    """First-chaos kernel f_1(p) = -i (e.p)/(2 pi) along a fixed axis and
    the resolvent-solved v_1(p) = gamma f_1(p)/(lambda + |p|^2(1+g^lambda)/2)."""

    lam: float
    alpha: float
    axis: int = 0

    @property
    def gamma(self):
        return gamma_weak_lambda(self.lam, self.alpha)

    def f1(self, p):
        p = np.asarray(p, dtype=float)
        return -1j * p[..., self.axis] / (2.0 * np.pi)

    def g_lambda(self, pnorm):
        return g_of(ell_lambda(0.5 * np.asarray(pnorm, dtype=float) ** 2,
                               self.lam, self.gamma))

    def v1(self, p):
        p = np.asarray(p, dtype=float)
        p2 = np.sum(p * p, axis=-1)
        den = self.lam + 0.5 * p2 * (1.0 + self.g_lambda(np.sqrt(p2)))
        return self.gamma * self.f1(p) / den


def _log_radial_quad(integrand, lam, mollifier, rtol=1e-9):
    """integrate.quad of y -> integrand(y) dy over (0, inf) in u = log y,
    where y = |p|^2/2; resolves the lambda scale."""
    lo = math.log(lam) - 30.0
    hi = math.log(800.0 / mollifier.s**2)
    val, err = integrate.quad(lambda u: integrand(math.exp(u)) * math.exp(u),
                              lo, hi, limit=400, epsrel=rtol)
    return val, err


def diffusivity_pairing(lam, alpha, mollifier=ANALYTIC_MOLLIFIER):
    """<f_1, v_1> = (gamma^2/2) int V_hat(p) / (lambda + |p|^2(1+g^lambda)/2) dp
    (radial form pi gamma^2 int r V_hat/(...) dr); tends to sigma2(alpha)/2
    as lambda -> 0.  Returns (value, quadrature error)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if alpha == 0:
        return 0.0, 0.0
    gamma = gamma_weak_lambda(lam, alpha)

    def integrand(y):
        g = g_of(ell_lambda(y, lam, gamma))
        return (mollifier.v_hat_radial(math.sqrt(2.0 * y))
                / (lam + y * (1.0 + g)))

    val, err = _log_radial_quad(integrand, lam, mollifier)
    if err > 1e-6 * abs(val):
        raise QuadratureError("diffusivity_pairing did not converge")
    return math.pi * gamma**2 * val, math.pi * gamma**2 * err


def l2_mass(lam, alpha, mollifier=ANALYTIC_MOLLIFIER):
    """lambda ||v_1||^2 = lambda gamma^2 int r V_hat/(lambda + r^2(1+g)/2)^2 dr;
    bounded by O(gamma^2) and vanishing with lambda."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if alpha == 0:
        return 0.0
    gamma = gamma_weak_lambda(lam, alpha)

    def integrand(y):
        g = g_of(ell_lambda(y, lam, gamma))
        return (mollifier.v_hat_radial(math.sqrt(2.0 * y))
                / (lam + y * (1.0 + g)) ** 2)

    val, err = _log_radial_quad(integrand, lam, mollifier)
    if err > 1e-6 * abs(val):
        raise QuadratureError("l2_mass did not converge")
    return lam * gamma**2 * val


def offdiag_pairing(model, lam, alpha, quad_samples=10**6, seed=0,
                    mollifier=ANALYTIC_MOLLIFIER):
    """Off-diagonal pairing <phi[1], phi[2]> by importance-sampled MC:

        (gamma^4 / 32 pi^2) int  K(p1, p2) V_hat(p1) V_hat(p2) dp1 dp2 /
            [ |p1|^3 |p2|^3 (lam + |p1+p2|^2/2)
              (lam + |p1|^2/2)^{1/2} (lam + |p2|^2/2)^{1/2} ]

    with K = (p1.p2)^2 (e1.p1)(e1.p2) for the self-repelling polymer and
    K = (p1 x p2)^2 (e2.p1)(e2.p2) for the divergence-free model.  The
    substitution u = p1 + p2 with a log-radial proposal in u resolves the
    near-cancelling region p2 ~ -p1.  Returns (value, stderr).
    """
    if model not in ("srbp", "dcgff"):
        raise ValueError("model must be 'srbp' or 'dcgff'")
    if quad_samples < 10**5:
        raise ValueError("need at least 1e5 samples")
    if alpha == 0:
        return 0.0, 0.0
    gamma = gamma_weak_lambda(lam, alpha)
    pref = gamma**4 / (32.0 * math.pi**2)

    r1_lims = (1e-5, 30.0 / mollifier.s)
    ru_lims = (min(1e-8, math.sqrt(lam) * 1e-2), 60.0 / mollifier.s)
    lr1 = math.log(r1_lims[1] / r1_lims[0])
    lru = math.log(ru_lims[1] / ru_lims[0])

    total = 0.0
    total2 = 0.0
    count = 0
    batch = 200000
    k = 0
    n = int(quad_samples)
    while count < n:
        m = min(batch, n - count)
        rng = substream(seed, 13, k)
        u1 = rng.random(m)
        r1 = r1_lims[0] * (r1_lims[1] / r1_lims[0]) ** u1
        a1 = rng.random(m) * 2.0 * np.pi
        p1 = r1[:, None] * np.stack([np.cos(a1), np.sin(a1)], axis=-1)
        u2 = rng.random(m)
        ru = ru_lims[0] * (ru_lims[1] / ru_lims[0]) ** u2
        au = rng.random(m) * 2.0 * np.pi
        uu = ru[:, None] * np.stack([np.cos(au), np.sin(au)], axis=-1)
        p2 = uu - p1

        n1 = r1
        n2 = np.sqrt(np.sum(p2 * p2, axis=-1))
        if model == "srbp":
            kern = (np.sum(p1 * p2, axis=-1) ** 2
                    * p1[:, 0] * p2[:, 0])
        else:
            cross = p1[:, 0] * p2[:, 1] - p1[:, 1] * p2[:, 0]
            kern = cross**2 * p1[:, 1] * p2[:, 1]
        den = (n1**3 * np.maximum(n2, 1e-300) ** 3
               * (lam + 0.5 * ru**2)
               * np.sqrt(lam + 0.5 * n1**2)
               * np.sqrt(lam + 0.5 * n2**2))
        f = (pref * kern * mollifier.v_hat_radial(n1)
             * mollifier.v_hat_radial(n2) / den)
        # divide by proposal densities q(p1) q(u)
        vals = f * (2.0 * np.pi * lr1 * r1**2) * (2.0 * np.pi * lru * ru**2)
        total += float(np.sum(vals))
        total2 += float(np.sum(vals**2))
        count += m
        k += 1
    mean = total / count
    var = max(total2 / count - mean**2, 0.0)
    return mean, math.sqrt(var / count)


def intercept_fit(lams, values, alpha, errors=None):
    """Least-squares fit value = a + b gamma^2(lambda); returns the
    lambda -> 0 intercept a (with its formal standard error when per-point
    errors are supplied)."""
    lams = np.asarray(lams, dtype=float)
    values = np.asarray(values, dtype=float)
    g2 = np.array([gamma_weak_lambda(l, alpha) ** 2 for l in lams])
    A = np.stack([np.ones_like(g2), g2], axis=-1)
    if errors is not None:
        w = 1.0 / np.asarray(errors, dtype=float)
        A = A * w[:, None]
        values = values * w
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    cov = np.linalg.inv(A.T @ A)
    return {"intercept": float(coef[0]), "slope": float(coef[1]),
            "intercept_se": float(np.sqrt(cov[0, 0]))}


def pairing_dominated_by_norm(lam, alpha):
    """Same-quadrature domination check: dropping g^lambda >= 0 from the
    pairing denominator gives exactly pi * weak_norm, so
    diffusivity_pairing <= pi * weak_norm."""
    pairing, err = diffusivity_pairing(lam, alpha)
    bound = math.pi * weak_norm(lam, alpha)
    return pairing, bound, pairing <= bound + err
