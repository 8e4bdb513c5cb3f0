"""Spectral sampling of the random environment omega = grad(sqrt(V) * GFF).

The scalar potential xi = sqrt(V) * Phi is synthesized mode by mode with
Fourier variance L^2 V_hat(p) / |p|^2 (torus normalization: field values
are (1/L^2) sum_p xi_hat(p) e^{i p.x}).  omega is then taken as the
*discrete central-difference gradient* of xi, i.e. with spectral
multiplier i sin(p_k h)/h instead of i p_k.  This makes the discrete curl
and the gradient-structure reconstruction exact to rounding, at the cost
of an O(h^2/s^2) covariance bias absorbed in the discretization band.
"""

import struct
from dataclasses import dataclass

import numpy as np
from scipy import fft

from .kernels import Mollifier
from .rng import substream


@dataclass(frozen=True)
class TorusGrid:
    """Periodic grid on [0, L)^2 with n points per side."""

    L: float
    n: int

    def __post_init__(self):
        if self.n < 64 or (self.n & (self.n - 1)) != 0:
            raise ValueError("n must be a power of two, >= 64")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @property
    def h(self):
        return self.L / self.n

    def check_resolves(self, mollifier):
        if self.h > mollifier.s / 2:
            raise ValueError("grid spacing h must be <= s/2")
        if self.L < 40 * mollifier.s:
            raise ValueError("torus must satisfy L >= 40 s")

    def momenta(self):
        """Angular wavenumbers along one axis, FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)


@dataclass
class GradientField:
    """Sampled environment omega on a TorusGrid; values has shape (n, n, 2)."""

    grid: TorusGrid
    values: np.ndarray
    seed: int

    def curl_rms_rel(self):
        """RMS of the central-difference curl, relative to RMS(|omega|)."""
        w1 = self.values[..., 0]
        w2 = self.values[..., 1]
        h = self.grid.h
        d1w2 = (np.roll(w2, -1, axis=0) - np.roll(w2, 1, axis=0)) / (2 * h)
        d2w1 = (np.roll(w1, -1, axis=1) - np.roll(w1, 1, axis=1)) / (2 * h)
        curl = d1w2 - d2w1
        denom = np.sqrt(np.mean(np.sum(self.values.astype(np.float64) ** 2,
                                       axis=-1)))
        return float(np.sqrt(np.mean(curl.astype(np.float64) ** 2)) / denom)

    def component_means(self):
        return self.values.reshape(-1, 2).mean(axis=0)

    def potential(self):
        """Reconstruct the scalar potential xi by spectral integration
        (inverse of the central-difference gradient multiplier)."""
        n = self.grid.n
        h = self.grid.h
        k = self.grid.momenta()
        mult1 = 1j * np.sin(k[:, None] * h) / h
        mult2 = 1j * np.sin(k[None, :] * h) / h
        w1_hat = np.fft.fft2(self.values[..., 0].astype(np.float64))
        w2_hat = np.fft.fft2(self.values[..., 1].astype(np.float64))
        denom = np.abs(mult1) ** 2 + np.abs(mult2) ** 2
        denom[0, 0] = 1.0
        xi_hat = (np.conj(mult1) * w1_hat + np.conj(mult2) * w2_hat) / denom
        xi_hat[0, 0] = 0.0
        return np.real(np.fft.ifft2(xi_hat))


def sample_environment(grid, mollifier=None, seed=0, dtype=np.float64):
    """Draw one environment field; deterministic in (grid, mollifier, seed).

    Synthesis: real white noise w, whose FFT carries the exact Hermitian
    structure with E|w_hat(p)|^2 = n^2, is colored by the target mode
    amplitude sqrt(L^2 V_hat(p)/|p|^2)/n; the two gradient components come
    from inverse real FFTs of the colored half-spectrum.  float32 requests
    run the whole pipeline in single precision.
    """
    if mollifier is None:
        mollifier = Mollifier()
    grid.check_resolves(mollifier)
    n, L, h = grid.n, grid.L, grid.h
    real_t = np.float32 if dtype == np.float32 else np.float64

    rng = substream(seed, 0)
    noise = rng.standard_normal((n, n), dtype=real_t)
    w_hat = fft.rfft2(noise)

    k = grid.momenta()
    k1 = k[:, None]
    k2 = k[None, : n // 2 + 1]
    p2 = (k1**2 + k2**2).astype(real_t)
    p2[0, 0] = 1.0
    amp = np.sqrt(L**2 * mollifier.v_hat_radial(np.sqrt(p2)) / p2) / n
    amp[0, 0] = 0.0
    xi_hat = (amp.astype(w_hat.dtype) * w_hat)

    # discrete central-difference gradient in spectral form
    scale = n**2 / L**2
    mult1 = (1j * np.sin(k1 * h) / h).astype(w_hat.dtype)
    mult2 = (1j * np.sin(k2 * h) / h).astype(w_hat.dtype)
    values = np.empty((n, n, 2), dtype=dtype)
    values[..., 0] = fft.irfft2(mult1 * xi_hat, s=(n, n)) * scale
    values[..., 1] = fft.irfft2(mult2 * xi_hat, s=(n, n)) * scale
    return GradientField(grid=grid, values=values, seed=seed)


def _field_moments(values, displacements):
    """Per-field lattice averages omega_a(x) omega_b(x + dx); returns
    (n_disp, 2, 2)."""
    v = values.astype(np.float64)
    out = np.empty((len(displacements), 2, 2))
    for d, (di, dj) in enumerate(displacements):
        shifted = np.roll(v, shift=(-int(di), -int(dj)), axis=(0, 1))
        for a in range(2):
            for b in range(2):
                out[d, a, b] = np.mean(v[..., a] * shifted[..., b])
    return out


def _jackknife(per_field):
    m = per_field.shape[0]
    mean = per_field.mean(axis=0)
    jack = (per_field.sum(axis=0)[None] - per_field) / (m - 1)
    se = np.sqrt((m - 1) / m * np.sum((jack - jack.mean(axis=0)) ** 2,
                                      axis=0))
    return mean, se


def empirical_covariance(fields, dx):
    """Sample covariance of (omega(x), omega(x + dx)) averaged over x.

    dx is a lattice displacement in index units (integers).  Returns a
    (2x2 matrix, 2x2 jackknife standard errors) pair.
    """
    if len(fields) < 2:
        raise ValueError("need at least two fields")
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise ValueError("fields live on different grids")
    per_field = np.stack([_field_moments(f.values, [dx]) for f in fields])
    mean, se = _jackknife(per_field[:, 0])
    return mean, se


def streaming_covariance(field_iter, displacements):
    """Like empirical_covariance, but consumes fields lazily (one in
    memory at a time) and handles several displacements per pass.
    Returns (means, ses) of shape (n_disp, 2, 2)."""
    per_field = [ _field_moments(f.values, displacements)
                  for f in field_iter ]
    per_field = np.stack(per_field)
    if per_field.shape[0] < 2:
        raise ValueError("need at least two fields")
    return _jackknife(per_field)


_MAGIC = b"SRBPFLD1"
_HEADER = struct.Struct("<8sIdQ4x")  # magic, n, L, seed, pad to 32 bytes


def save_field(field, path):
    """Dump a field: 32-byte header (magic 'SRBPFLD1', n, L, seed) followed
    by little-endian float64, row-major, component-interleaved."""
    header = _HEADER.pack(_MAGIC, field.grid.n, field.grid.L,
                          np.uint64(field.seed))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field.values,
                                      dtype="<f8").tobytes())


def load_field(path):
    with open(path, "rb") as fh:
        magic, n, L, seed = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError("not a field dump")
        data = np.frombuffer(fh.read(), dtype="<f8")
    values = data.reshape(n, n, 2)
    return GradientField(grid=TorusGrid(L=L, n=n), values=values, seed=seed)
