"""Seed-reproducible generators for channels, beamforming weights and the
effective-gain laws.

Randomness is keyed, not sequential: every (seed, stream_id) pair owns a
Philox counter-based stream, and independent work units (frames, grid rows,
realizations) draw from sub-streams at disjoint counter blocks.  Results are
therefore identical for any worker count and platform.
"""

from dataclasses import dataclass

import numpy as np

#: relative eigenvalue cutoff for the numerical rank of a covariance
RANK_TOL = 1e-9


@dataclass(frozen=True)
class SeededStream:
    """Handle of a reproducible random stream, keyed by (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def generator(self):
        """Fresh numpy Generator positioned at the start of this stream."""
        return np.random.Generator(
            np.random.Philox(key=[self.seed % 2**64, self.stream_id % 2**64])
        )

    def substream(self, index):
        """Generator for independent work unit ``index`` (disjoint Philox
        counter block; each unit may draw up to 2^66 values)."""
        bg = np.random.Philox(
            key=[self.seed % 2**64, self.stream_id % 2**64],
            counter=[0, int(index) + 1, 0, 0],
        )
        return np.random.Generator(bg)


def randn_complex(rng, *shape):
    """i.i.d. zero-mean unit-variance circular complex Gaussians."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass(frozen=True)
class ChannelSet:
    """M user channels of dimension N, rows h_1 ... h_M."""

    channels: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.channels)
        if h.ndim != 2 or h.size == 0:
            raise ValueError("channels must be a non-empty (M, N) array")
        if np.any(np.all(h == 0, axis=1)):
            raise ValueError("all-zero channel")

    @property
    def n_users(self):
        return self.channels.shape[0]

    @property
    def n_antennas(self):
        return self.channels.shape[1]


def sample_channel_set(n, m, stream):
    """M i.i.d. CN(0, I_N) channel vectors."""
    if n < 1 or m < 1:
        raise ValueError(f"need n, m >= 1, got n={n}, m={m}")
    rng = stream.generator()
    return ChannelSet(randn_complex(rng, m, n))


def psd_sqrt(w, rank_tol=RANK_TOL):
    """Square-root factor B (N x r) with B B^H = W and r the numerical rank.

    W must be Hermitian PSD (symmetry residual <= 1e-10); eigenvalues below
    rank_tol * lambda_max are treated as zero.
    """
    w = np.asarray(w, dtype=np.complex128)
    if np.linalg.norm(w - w.conj().T) > 1e-10:
        raise ValueError("covariance is not Hermitian (residual > 1e-10)")
    lam, v = np.linalg.eigh(0.5 * (w + w.conj().T))
    lam_max = lam[-1]
    if lam_max <= 0:
        raise ValueError("covariance has no positive eigenvalue")
    keep = lam > rank_tol * lam_max
    b = v[:, keep] * np.sqrt(lam[keep])
    return b, int(keep.sum())


@dataclass(frozen=True)
class WeightSampler:
    """Draws beamforming weights with covariance W = B B^H.

    gauss_sbf:  w = B g with g ~ CN(0, I_r), so E[w w^H] = W and the
                normalized gain |h^H w|^2 / (h^H W h) is unit-mean
                exponential.
    ellip_sbf:  w = sqrt(r) B u with u uniform on the complex unit sphere
                in dimension r; the normalized gain is r * Beta(1, r-1).
    """

    scheme: str
    root: np.ndarray
    rank: int

    @classmethod
    def from_covariance(cls, scheme, w):
        if scheme not in ("gauss_sbf", "ellip_sbf"):
            raise ValueError(f"unsupported weight scheme {scheme!r}")
        b, r = psd_sqrt(w)
        return cls(scheme, b, r)

    def sample(self, rng, size=None):
        """One weight vector (size None) or a (size, N) block of them."""
        n_draw = 1 if size is None else int(size)
        g = randn_complex(rng, n_draw, self.rank)
        if self.scheme == "ellip_sbf":
            g = g / np.linalg.norm(g, axis=1, keepdims=True) * np.sqrt(self.rank)
        w = g @ self.root.T
        return w[0] if size is None else w

    def sample_pair(self, rng, size):
        """(size, N) weight pair (w1, w2) for the Alamouti-coded schemes.

        Gaussian pairs are independent draws.  Ellipsoid pairs are drawn
        jointly, one uniform vector on the sphere in dimension 2r split
        across the two branches: this is the construction under which the
        combined gain (|h^H w1|^2 + |h^H w2|^2)/(2 rho) follows the
        r * Beta(2, 2r-2) law of the closed-form rate (two independent
        sphere draws do not).
        """
        g = randn_complex(rng, size, 2 * self.rank)
        if self.scheme == "ellip_sbf":
            g = g / np.linalg.norm(g, axis=1, keepdims=True) * np.sqrt(2 * self.rank)
        return g[:, : self.rank] @ self.root.T, g[:, self.rank :] @ self.root.T


def sample_gauss_sbf_weight(ws, stream_or_rng, size=None):
    """Gaussian SBF weight draw(s); see WeightSampler."""
    if ws.scheme != "gauss_sbf":
        raise ValueError(f"sampler scheme is {ws.scheme!r}, not gauss_sbf")
    rng = stream_or_rng.generator() if isinstance(stream_or_rng, SeededStream) else stream_or_rng
    return ws.sample(rng, size)


def sample_ellip_sbf_weight(ws, stream_or_rng, size=None):
    """Elliptic SBF weight draw(s); see WeightSampler."""
    if ws.scheme != "ellip_sbf":
        raise ValueError(f"sampler scheme is {ws.scheme!r}, not ellip_sbf")
    rng = stream_or_rng.generator() if isinstance(stream_or_rng, SeededStream) else stream_or_rng
    return ws.sample(rng, size)


def sample_effective_gain(law, stream_or_rng, size=None):
    """Direct draws from a normalized gain law (see sbfmc.gainlaws)."""
    rng = stream_or_rng.generator() if isinstance(stream_or_rng, SeededStream) else stream_or_rng
    out = law.sample(rng, 1 if size is None else int(size))
    return float(out[0]) if size is None else out


def sample_exponential_vector(r, stream_or_rng, size=None):
    """r i.i.d. unit-mean exponentials; (size, r) block when size given."""
    if r < 1:
        raise ValueError(f"need r >= 1, got {r}")
    rng = stream_or_rng.generator() if isinstance(stream_or_rng, SeededStream) else stream_or_rng
    shape = (r,) if size is None else (int(size), r)
    return rng.standard_exponential(shape)
