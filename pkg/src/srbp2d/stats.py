"""Annealed ensemble statistics: mean-squared displacement, effective
diffusivity, isotropy, characteristic-function Gaussianity, and the
strong-coupling superdiffusivity trend.

All estimators are pure reductions over immutable position arrays and
deterministic given their inputs (bootstraps draw from named substreams).
Quantitative equality with the limiting diffusivity is *not* asserted at
reachable scales -- convergence is logarithmic -- so the checks are
enhancement, isotropy, Gaussianity with the measured variance, and trend.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import substream


def _jackknife_mean_se(samples):
    """Leave-one-out jackknife standard error of the mean, along axis 0."""
    m = samples.shape[0]
    if m < 2:
        return np.full(samples.shape[1:], np.nan)
    mean = samples.mean(axis=0)
    jack = (samples.sum(axis=0)[None] - samples) / (m - 1)
    return np.sqrt((m - 1) / m * np.sum((jack - mean[None]) ** 2, axis=0))


def batch_means_se(samples, n_batches=20):
    """Batch-means standard error of the mean (axis 0); cross-check for
    the jackknife on independent replicates."""
    m = samples.shape[0]
    n_batches = min(n_batches, m)
    cut = (m // n_batches) * n_batches
    batches = samples[:cut].reshape(n_batches, -1, *samples.shape[1:])
    bm = batches.mean(axis=1)
    return bm.std(axis=0, ddof=1) / math.sqrt(n_batches)


def interpolate_positions(trajectories, times):
    """Positions of every trajectory at the requested times, linearly
    interpolated between recorded steps.  Returns (n_paths, n_times, 2)."""
    times = np.asarray(times, dtype=float)
    t_max = times.max() if times.size else 0.0
    out = np.empty((len(trajectories), len(times), 2))
    for k, traj in enumerate(trajectories):
        if traj.times[-1] < t_max - 1e-12:
            raise ValueError(
                f"trajectory {k} ends at t={traj.times[-1]}, need {t_max}")
        for ax in (0, 1):
            out[k, :, ax] = np.interp(times, traj.times,
                                      traj.positions[:, ax])
    return out


@dataclass
class EnsembleSummary:
    """Per-time ensemble statistics with jackknife errors.

    dhat = MSD(t)/(2t) is the effective diffusivity of the (already
    rescaled) ensemble; NaN at t = 0.
    """

    n_paths: int
    times: np.ndarray
    msd: np.ndarray
    msd_se: np.ndarray
    ax_moments: np.ndarray      # (n_times, 2) per-axis second moments
    ax_diff: np.ndarray
    ax_diff_se: np.ndarray
    cross_moment: np.ndarray
    cross_se: np.ndarray
    dhat: np.ndarray
    dhat_se: np.ndarray
    meta: dict = field(default_factory=dict)
    positions: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_paths >= 2 and (np.any(self.msd < 0)
                                  or np.any(self.msd_se < 0)):
            raise ValueError("MSD and its stderr must be nonnegative")


def msd(trajectories, times, meta=None, keep_positions=True):
    """Ensemble MSD (and companions) at the requested times."""
    times = np.asarray(times, dtype=float)
    pos = interpolate_positions(trajectories, times)
    sq = pos**2                          # (n_paths, n_times, 2)
    r2 = sq.sum(axis=-1)
    xy = pos[..., 0] * pos[..., 1]
    axd = sq[..., 0] - sq[..., 1]

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = np.where(times > 0, 2.0 * times, np.nan)
    msd_mean = r2.mean(axis=0)
    msd_se = _jackknife_mean_se(r2)
    return EnsembleSummary(
        n_paths=len(trajectories),
        times=times,
        msd=msd_mean,
        msd_se=msd_se,
        ax_moments=sq.mean(axis=0),
        ax_diff=axd.mean(axis=0),
        ax_diff_se=_jackknife_mean_se(axd),
        cross_moment=xy.mean(axis=0),
        cross_se=_jackknife_mean_se(xy),
        dhat=msd_mean / denom,
        dhat_se=msd_se / denom,
        meta=dict(meta or {}),
        positions=pos if keep_positions else None,
    )


def _time_index(ensemble, t):
    idx = np.argmin(np.abs(ensemble.times - t))
    if abs(ensemble.times[idx] - t) > 1e-9 * max(abs(t), 1.0):
        raise ValueError(f"time {t} not in the ensemble grid")
    return idx


def effective_diffusivity(ensemble, t):
    """(D_hat, stderr) = MSD(t)/(2t) with propagated error; t > 0."""
    if t <= 0:
        raise ValueError("effective diffusivity needs t > 0")
    idx = _time_index(ensemble, t)
    return float(ensemble.dhat[idx]), float(ensemble.dhat_se[idx])


def isotropy_test(ensemble, t):
    """Per-axis second moments, their difference, and the cross-moment
    at time t, each with stderr and a z-score against 0."""
    idx = _time_index(ensemble, t)
    ax_diff = float(ensemble.ax_diff[idx])
    ax_se = float(ensemble.ax_diff_se[idx])
    cross = float(ensemble.cross_moment[idx])
    cross_se = float(ensemble.cross_se[idx])
    return {
        "t": float(t),
        "ax_moments": ensemble.ax_moments[idx].tolist(),
        "ax_diff": ax_diff,
        "ax_diff_se": ax_se,
        "ax_diff_z": ax_diff / ax_se if ax_se > 0 else 0.0,
        "cross_moment": cross,
        "cross_se": cross_se,
        "cross_z": cross / cross_se if cross_se > 0 else 0.0,
    }


def _empirical_cf(incr, thetas):
    """Empirical characteristic function of 2D increments at each theta;
    returns (cf values, per-theta stderr of the modulus deviation)."""
    phase = incr @ thetas.T              # (n_paths, n_thetas)
    z = np.exp(1j * phase)
    cf = z.mean(axis=0)
    # stderr of Re/Im parts combined; conservative modulus error
    se = np.sqrt((1.0 - np.abs(cf) ** 2).clip(min=0.0) / incr.shape[0])
    return cf, se


def char_fn_test(ensemble, thetas, time_pairs, n_boot=400, seed=0):
    """Gaussianity of increments at the measured diffusivity.

    For each (t0, t1) compares the empirical annealed characteristic
    function of X_{t1} - X_{t0} against exp(-D_hat |theta|^2 dt / 2)
    with D_hat measured from the same ensemble, and bootstrap-tests the
    factorization of successive increments (macroscopic independence).
    """
    if ensemble.positions is None:
        raise ValueError("ensemble was built without stored positions")
    if ensemble.n_paths < 500:
        raise ValueError("need at least 500 paths")
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    t_last = max(t1 for _, t1 in time_pairs)
    dhat, _ = effective_diffusivity(ensemble, t_last)

    rows = []
    worst = 0.0
    worst_z = 0.0
    for t0, t1 in time_pairs:
        i0, i1 = _time_index(ensemble, t0), _time_index(ensemble, t1)
        incr = ensemble.positions[:, i1] - ensemble.positions[:, i0]
        cf, se = _empirical_cf(incr, thetas)
        target = np.exp(-0.5 * dhat * np.sum(thetas**2, axis=-1) * (t1 - t0))
        dev = np.abs(cf - target)
        z = dev / np.maximum(se, 1e-300)
        rows.append({"t0": float(t0), "t1": float(t1),
                     "max_abs_deviation": float(dev.max()),
                     "max_z": float(z.max())})
        worst = max(worst, float(dev.max()))
        worst_z = max(worst_z, float(z.max()))

    # factorization: joint CF of consecutive increments vs the product
    p_value = None
    if len(time_pairs) >= 2:
        (a0, a1), (b0, b1) = time_pairs[0], time_pairs[1]
        ia0, ia1 = _time_index(ensemble, a0), _time_index(ensemble, a1)
        ib0, ib1 = _time_index(ensemble, b0), _time_index(ensemble, b1)
        d1 = ensemble.positions[:, ia1] - ensemble.positions[:, ia0]
        d2 = ensemble.positions[:, ib1] - ensemble.positions[:, ib0]
        ph1 = d1 @ thetas.T
        ph2 = d2 @ thetas.T
        joint = np.exp(1j * (ph1 + ph2))
        z1 = np.exp(1j * ph1)
        z2 = np.exp(1j * ph2)
        obs = np.max(np.abs(joint.mean(0) - z1.mean(0) * z2.mean(0)))
        rng = substream(seed, 17)
        n = ensemble.n_paths
        count = 0
        for _ in range(n_boot):
            # independent resampling of the two increments kills any
            # dependence, giving the null distribution of the statistic
            i = rng.integers(0, n, n)
            j = rng.integers(0, n, n)
            stat = np.max(np.abs(np.exp(1j * (ph1[i] + ph2[j])).mean(0)
                                 - z1[i].mean(0) * z2[j].mean(0)))
            count += stat >= obs
        p_value = (count + 1) / (n_boot + 1)

    return {"dhat": float(dhat), "pairs": rows,
            "max_abs_deviation": worst, "max_z": worst_z,
            "factorization_p": None if p_value is None else float(p_value)}


def mann_kendall(values):
    """Mann-Kendall trend statistic (S, z-score) for a sequence."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    s = int(np.sum(np.sign(v[None, :] - v[:, None])[np.triu_indices(n, 1)]))
    var = n * (n - 1) * (2 * n + 5) / 18.0
    if s > 0:
        z = (s - 1) / math.sqrt(var)
    elif s < 0:
        z = (s + 1) / math.sqrt(var)
    else:
        z = 0.0
    return s, z


def superdiffusivity_scan(ensemble, n_boot=400, seed=0):
    """MSD/t at the ensemble's (log-spaced) positive times, a
    path-bootstrap Mann-Kendall trend test for MSD/t increasing, and an
    informational fit MSD/t = c (log t)^beta.

    The per-time MSD values share paths, so significance comes from
    resampling whole paths, not from the pointwise errors.
    """
    if ensemble.positions is None:
        raise ValueError("ensemble was built without stored positions")
    mask = ensemble.times > 0
    times = ensemble.times[mask]
    if len(times) < 5 or times[-1] / times[0] < 99.0:
        raise ValueError("need >= 5 times spanning >= 2 decades")
    r2 = np.sum(ensemble.positions[:, mask] ** 2, axis=-1)
    ratio = r2.mean(axis=0) / times
    ratio_se = _jackknife_mean_se(r2) / times

    s_obs, z_obs = mann_kendall(ratio)
    rng = substream(seed, 19)
    n = ensemble.n_paths
    neg = 0
    betas = []
    # log t > 0 is needed for the (log t)^beta fit; drop t <= 1
    fit_sel = times > 1.0 + 1e-12
    loglog = np.log(np.log(times[fit_sel])) if fit_sel.sum() >= 4 else None
    for _ in range(n_boot):
        idx = rng.integers(0, n, n)
        rb = r2[idx].mean(axis=0) / times
        sb, _ = mann_kendall(rb)
        neg += sb <= 0
        if loglog is not None:
            betas.append(np.polyfit(loglog, np.log(rb[fit_sel]), 1)[0])
    p_value = (neg + 1) / (n_boot + 1)

    report = {"times": times.tolist(), "msd_over_t": ratio.tolist(),
              "msd_over_t_se": ratio_se.tolist(),
              "mk_s": s_obs, "mk_z": z_obs,
              "increasing_p": float(p_value)}
    if loglog is not None and len(betas):
        beta = float(np.polyfit(loglog, np.log(ratio[fit_sel]), 1)[0])
        lo, hi = np.percentile(betas, [2.5, 97.5])
        report["beta"] = beta
        report["beta_ci"] = [float(lo), float(hi)]
    return report


def write_csv(ensemble, path):
    """`t,msd,msd_se,dhat,dhat_se,ax_diff,ax_diff_se` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "msd", "msd_se", "dhat", "dhat_se",
                    "ax_diff", "ax_diff_se"])
        for i, t in enumerate(ensemble.times):
            w.writerow([repr(float(v)) for v in
                        (t, ensemble.msd[i], ensemble.msd_se[i],
                         ensemble.dhat[i], ensemble.dhat_se[i],
                         ensemble.ax_diff[i], ensemble.ax_diff_se[i])])
