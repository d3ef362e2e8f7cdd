"""Symbol-level multicast link simulator: uncoded per-user and worst-user
BER for the beamforming, stochastic-beamforming, Alamouti-coded and
precoded transmission schemes, with exhaustive ML detection where needed.

Conventions: noise is CN(0, 1) per received symbol, so the power P carries
the SNR; weights are redrawn per symbol (SBF) or per 2-symbol block
(SBF-Alamouti); precoded schemes use a fixed square-root factor B of the
transmit covariance.  All users receive the same payload bits (multicast)
through independent noise.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .capacity import CovarianceMatrix
from .sampling import SeededStream, WeightSampler, psd_sqrt, randn_complex

SCHEMES = (
    "bf",
    "gauss_sbf",
    "ellip_sbf",
    "bf_alamouti",
    "gauss_sbf_alamouti",
    "ellip_sbf_alamouti",
    "precoded_sm",
    "precoded_qostbc",
)

BLOCK_LENGTH = {
    "bf": 1,
    "gauss_sbf": 1,
    "ellip_sbf": 1,
    "bf_alamouti": 2,
    "gauss_sbf_alamouti": 2,
    "ellip_sbf_alamouti": 2,
    "precoded_sm": 1,
    "precoded_qostbc": 4,
}

_ALAMOUTI = ("bf_alamouti", "gauss_sbf_alamouti", "ellip_sbf_alamouti")
_ML_SEARCH_GUARD = 10**6


def n_workers():
    """Worker cap from the SBF_THREADS environment variable (default 1)."""
    try:
        return max(1, int(os.environ.get("SBF_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# constellations


@dataclass(frozen=True)
class Constellation:
    """Unit-energy complex constellation with Gray bit labels; point i
    carries the bit pattern labels[i]."""

    name: str
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if abs(np.mean(np.abs(self.points) ** 2) - 1.0) > 1e-12:
            raise ValueError(f"{self.name}: average energy != 1")
        if sorted(self.labels.tolist()) != list(range(len(self.points))):
            raise ValueError(f"{self.name}: labels must be a permutation of 0..K-1")

    @property
    def size(self):
        return len(self.points)

    @property
    def bits_per_symbol(self):
        return int(round(math.log2(self.size)))

    def index_of_label(self):
        inv = np.empty(self.size, dtype=np.int64)
        inv[self.labels] = np.arange(self.size)
        return inv


_GRAY2 = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}


def make_constellation(name):
    """BPSK, Gray QPSK or Gray 16-QAM, unit average energy."""
    name = name.lower()
    if name == "bpsk":
        points = np.array([1.0 + 0j, -1.0 + 0j])
        labels = np.array([0, 1])
    elif name == "qpsk":
        pts, labs = [], []
        for lab in range(4):
            bi, bq = (lab >> 1) & 1, lab & 1
            pts.append(((1 - 2 * bi) + 1j * (1 - 2 * bq)) / np.sqrt(2.0))
            labs.append(lab)
        points, labels = np.array(pts), np.array(labs)
    elif name in ("qam16", "16qam"):
        pts, labs = [], []
        for lab in range(16):
            bi, bq = (lab >> 2) & 3, lab & 3
            pts.append((_GRAY2[bi] + 1j * _GRAY2[bq]) / np.sqrt(10.0))
            labs.append(lab)
        points, labels = np.array(pts), np.array(labs)
    else:
        raise ValueError(f"unknown constellation {name!r}")
    return Constellation(name, points, labels)


def gray_adjacency_ok(constellation):
    """True when grid-adjacent points differ in exactly one label bit."""
    pts, labs = constellation.points, constellation.labels
    step = np.min(np.abs(pts[:, None] - pts[None, :])[np.triu_indices(len(pts), 1)])
    ok = True
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if abs(abs(pts[i] - pts[j]) - step) < 1e-9:
                ok &= int(labs[i] ^ labs[j]).bit_count() == 1
    return ok


def bits_to_symbol_indices(bits, constellation):
    """Pack a 0/1 array into constellation point indices (Gray labels)."""
    bps = constellation.bits_per_symbol
    if bits.size % bps:
        raise ValueError(f"bit count {bits.size} not divisible by {bps}")
    weights = 1 << np.arange(bps - 1, -1, -1)
    labels = bits.reshape(-1, bps).astype(np.int64) @ weights
    return constellation.index_of_label()[labels]


def count_bit_errors(idx_tx, idx_rx, constellation):
    """Total differing bits between transmitted and detected point indices."""
    labs = constellation.labels
    return int(np.bitwise_count(np.bitwise_xor(labs[idx_tx], labs[idx_rx])).sum())


# ---------------------------------------------------------------------------
# space-time codes


def alamouti_encode(s1, s2):
    """2x2 orthogonal code block, rows = time slots, columns = branches."""
    return np.array([[s1, s2], [-np.conj(s2), np.conj(s1)]])


def alamouti_combine(y, g, noise_var=1.0):
    """Combine the two received slots into per-symbol decision statistics.

    With y1 = g1 s1 + g2 s2 + n1 and y2 = -g1 s2* + g2 s1* + n2 the outputs
    are z_k = (|g1|^2 + |g2|^2) s_k + noise.  noise_var only scales the
    noise term and is accepted for interface symmetry.
    """
    del noise_var
    y1, y2 = y[..., 0], y[..., 1]
    g1, g2 = g[..., 0], g[..., 1]
    z1 = np.conj(g1) * y1 + g2 * np.conj(y2)
    z2 = np.conj(g2) * y1 - g1 * np.conj(y2)
    return np.stack([z1, z2], axis=-1)


def qostbc_encode(s):
    """The 4x4 quasi-orthogonal block for symbols s = (s1, s2, s3, s4)."""
    s = np.asarray(s, dtype=np.complex128)
    if s.shape != (4,):
        raise ValueError("qostbc_encode needs exactly 4 symbols")
    return _qostbc_encode_batch(s[None, :])[0]


def _qostbc_encode_batch(s):
    """(B, 4) symbols -> (B, 4, 4) code blocks."""
    s1, s2, s3, s4 = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
    c = np.empty((s.shape[0], 4, 4), dtype=np.complex128)
    c[:, 0, 0], c[:, 0, 1], c[:, 0, 2], c[:, 0, 3] = s1, s2, s3, s4
    c[:, 1, 0], c[:, 1, 1] = -np.conj(s2), np.conj(s1)
    c[:, 1, 2], c[:, 1, 3] = -np.conj(s4), np.conj(s3)
    c[:, 2, 0], c[:, 2, 1] = -np.conj(s3), -np.conj(s4)
    c[:, 2, 2], c[:, 2, 3] = np.conj(s1), np.conj(s2)
    c[:, 3, 0], c[:, 3, 1], c[:, 3, 2], c[:, 3, 3] = s4, -s3, -s2, s1
    return c


# ---------------------------------------------------------------------------
# scheme configuration and per-scheme precomputation


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    covariance: CovarianceMatrix
    constellation: Constellation
    power: float
    frame_length: int = 1440
    qostbc_detection: str = "auto"  # pair | full | auto

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.power < 0:
            raise ValueError("power must be >= 0")
        blk = BLOCK_LENGTH[self.scheme]
        if self.frame_length < 1 or self.frame_length % blk:
            raise ValueError(
                f"frame length {self.frame_length} not divisible by block length {blk}"
            )
        if self.qostbc_detection not in ("auto", "pair", "full"):
            raise ValueError(f"bad qostbc_detection {self.qostbc_detection!r}")


@dataclass(frozen=True)
class SimResult:
    per_user_ber: np.ndarray
    worst_user_ber: float
    bits_simulated: int
    seed: SeededStream
    worst_user_stderr: float
    diagnostics: dict = field(default_factory=dict)


class _SchemeOps:
    """Factors of the covariance needed by each scheme, computed once."""

    def __init__(self, cfg):
        self.cfg = cfg
        w = cfg.covariance.entries
        self.root, self.rank = psd_sqrt(w)
        self.n_antennas = w.shape[0]
        lam, v = np.linalg.eigh(w)
        self.principal = v[:, -1]
        # Alamouti branch pair: top-2 eigenvectors, power split by
        # eigenvalue, scaled so the two branch norms sum to 2
        lam2 = np.clip(lam[-2:][::-1], 0.0, None)
        tot = lam2.sum()
        b1 = v[:, -1] * math.sqrt(2.0 * lam2[0] / tot)
        b2 = v[:, -2] * math.sqrt(2.0 * lam2[1] / tot)
        self.bf_pair = np.stack([b1, b2], axis=0)
        if cfg.scheme in ("gauss_sbf", "ellip_sbf"):
            self.sampler = WeightSampler.from_covariance(cfg.scheme, w)
        elif cfg.scheme in ("gauss_sbf_alamouti", "ellip_sbf_alamouti"):
            base = "gauss_sbf" if cfg.scheme.startswith("gauss") else "ellip_sbf"
            self.sampler = WeightSampler.from_covariance(base, w)
        if cfg.scheme == "precoded_qostbc" and self.rank != 4:
            raise ValueError(
                f"precoded QOSTBC needs a rank-4 covariance, got rank {self.rank}"
            )


def _draw_weights(ops, rng, count):
    """(count, N) weights for the scheme's weight law."""
    scheme = ops.cfg.scheme
    if scheme == "bf":
        return np.repeat(ops.principal[None, :], count, axis=0)
    return ops.sampler.sample(rng, count)


def _nearest_point(values, scale, constellation):
    """Nearest constellation point of values/scale, scale-robust: uses the
    direct metric |values - scale * point|^2."""
    diff = values[:, None] - scale[:, None] * constellation.points[None, :]
    return np.argmin(np.abs(diff) ** 2, axis=1)


def _all_tuples(n_symbols, size):
    """(size^n, n) mixed-radix enumeration of symbol-index tuples."""
    n_cand = size**n_symbols
    if n_cand > _ML_SEARCH_GUARD:
        raise ValueError(
            f"search space {size}^{n_symbols} exceeds the {_ML_SEARCH_GUARD} guard"
        )
    idx = np.arange(n_cand)
    cols = []
    for j in range(n_symbols - 1, -1, -1):
        cols.append((idx // size**j) % size)
    return np.stack(cols, axis=1)


def ml_detect_exhaustive(y, eff_channel, constellation, n_symbols, noise_var=1.0):
    """Exact ML detection by exhaustive search.

    Parameters
    ----------
    y : (L,) or (B, L) received vector(s).
    eff_channel : callable mapping (n_cand, n_symbols) symbol values to
        (n_cand, L) noiseless received vectors (linear or conjugate-linear).
    constellation, n_symbols : symbol alphabet and tuple length; the search
        space |constellation|^n_symbols is capped at 1e6.
    noise_var : accepted for interface symmetry; the argmin is unaffected
        by a common noise variance.

    Returns the detected symbol-index tuples, shape (n_symbols,) or
    (B, n_symbols).
    """
    del noise_var
    tuples = _all_tuples(n_symbols, constellation.size)
    cand = np.asarray(eff_channel(constellation.points[tuples]))
    y = np.asarray(y, dtype=np.complex128)
    single = y.ndim == 1
    yb = y[None, :] if single else y
    best = backend.min_dist_detect(yb, cand)
    out = tuples[best]
    return out[0] if single else out


def detect_qostbc(y_blocks, g, constellation, power, mode="auto"):
    """ML detection of quasi-orthogonal blocks.

    y_blocks : (B, 4) received slots per block for one user.
    g : (4,) effective stream channel B^H h.
    mode : "full" enumerates all |C|^4 tuples; "pair" exploits the exact
        decoupling of the code's metric into the symbol pairs {s1, s4} and
        {s2, s3}; "auto" uses full search only for tiny alphabets.

    Returns (B, 4) detected symbol indices.
    """
    size = constellation.size
    if mode == "auto":
        mode = "full" if size**4 <= 4096 else "pair"
    gc = g.conj()
    sp = math.sqrt(power)
    if mode == "full":
        tuples = _all_tuples(4, size)
        blocks = _qostbc_encode_batch(constellation.points[tuples])
        cand = sp * np.einsum("j,bjt->bt", gc, blocks)
        best = backend.min_dist_detect(y_blocks, cand)
        return tuples[best]
    if mode != "pair":
        raise ValueError(f"bad detection mode {mode!r}")
    pair_tuples = _all_tuples(2, size)
    pts = constellation.points[pair_tuples]
    zeros = np.zeros(len(pair_tuples), dtype=np.complex128)
    s14 = np.stack([pts[:, 0], zeros, zeros, pts[:, 1]], axis=1)
    s23 = np.stack([zeros, pts[:, 0], pts[:, 1], zeros], axis=1)
    cand14 = sp * np.einsum("j,bjt->bt", gc, _qostbc_encode_batch(s14))
    cand23 = sp * np.einsum("j,bjt->bt", gc, _qostbc_encode_batch(s23))
    best14 = pair_tuples[backend.min_dist_detect(y_blocks, cand14)]
    best23 = pair_tuples[backend.min_dist_detect(y_blocks, cand23)]
    out = np.empty((y_blocks.shape[0], 4), dtype=np.int64)
    out[:, 0], out[:, 3] = best14[:, 0], best14[:, 1]
    out[:, 1], out[:, 2] = best23[:, 0], best23[:, 1]
    return out


# ---------------------------------------------------------------------------
# frame pipeline


def frame_bit_count(cfg, ops=None):
    """Payload bits per frame for a scheme configuration."""
    bps = cfg.constellation.bits_per_symbol
    if cfg.scheme == "precoded_sm":
        if ops is None:
            ops = _SchemeOps(cfg)
        return cfg.frame_length * bps * ops.rank
    return cfg.frame_length * bps


def _encode_frame(cfg, ops, bits, rng):
    """Transmit signal (N, T) plus the receiver-side info for this frame.

    Draw order within a frame is fixed (weights only; payload bits and
    noise are drawn by the caller) so results are reproducible.
    """
    con = cfg.constellation
    t_len = cfg.frame_length
    sp = math.sqrt(cfg.power)
    scheme = cfg.scheme
    if scheme in ("bf", "gauss_sbf", "ellip_sbf"):
        idx = bits_to_symbol_indices(bits, con)
        s = con.points[idx]
        w = _draw_weights(ops, rng, t_len)  # (T, N)
        x = sp * (w * s[:, None]).T
        return x, {"weights": w, "symbols": idx}
    if scheme in _ALAMOUTI:
        idx = bits_to_symbol_indices(bits, con)
        s = con.points[idx].reshape(-1, 2)
        n_blocks = s.shape[0]
        if scheme == "bf_alamouti":
            w1 = np.repeat(ops.bf_pair[0][None, :], n_blocks, axis=0)
            w2 = np.repeat(ops.bf_pair[1][None, :], n_blocks, axis=0)
        else:
            w1, w2 = ops.sampler.sample_pair(rng, n_blocks)
        amp = math.sqrt(cfg.power / 2.0)
        x = np.empty((ops.n_antennas, t_len), dtype=np.complex128)
        x[:, 0::2] = amp * (w1 * s[:, 0:1] + w2 * s[:, 1:2]).T
        x[:, 1::2] = amp * (-w1 * np.conj(s[:, 1:2]) + w2 * np.conj(s[:, 0:1])).T
        return x, {"w1": w1, "w2": w2, "symbols": idx}
    if scheme == "precoded_sm":
        idx = bits_to_symbol_indices(bits, con).reshape(t_len, ops.rank)
        s = con.points[idx]  # (T, d)
        x = sp * (ops.root @ s.T)
        return x, {"symbols": idx}
    if scheme == "precoded_qostbc":
        idx = bits_to_symbol_indices(bits, con).reshape(-1, 4)
        blocks = _qostbc_encode_batch(con.points[idx])  # (B, 4, 4)
        x = sp * np.einsum("nj,bjt->nbt", ops.root, blocks).reshape(ops.n_antennas, t_len)
        return x, {"symbols": idx}
    raise ValueError(f"unknown scheme {scheme!r}")


def transmit_frame(cfg, bits, stream):
    """Encode one frame of payload bits into the (N, T) transmit signal."""
    ops = _SchemeOps(cfg)
    bits = np.asarray(bits)
    expected = frame_bit_count(cfg, ops)
    if bits.size != expected:
        raise ValueError(f"expected {expected} bits, got {bits.size}")
    rng = stream.generator() if isinstance(stream, SeededStream) else stream
    x, _ = _encode_frame(cfg, ops, bits, rng)
    return x


def _detect_frame(cfg, ops, ch, x, info, rng):
    """Per-user detection; returns (M,) bit error counts for this frame."""
    con = cfg.constellation
    h = ch.channels
    m = h.shape[0]
    t_len = cfg.frame_length
    sp = math.sqrt(cfg.power)
    noise = randn_complex(rng, m, t_len)
    y_all = h.conj() @ x + noise  # (M, T)
    errors = np.zeros(m, dtype=np.int64)
    scheme = cfg.scheme
    if scheme in ("bf", "gauss_sbf", "ellip_sbf"):
        gains = info["weights"] @ h.conj().T  # (T, M)
        for i in range(m):
            det = _nearest_point(y_all[i], sp * gains[:, i], con)
            errors[i] = count_bit_errors(info["symbols"], det, con)
        return errors
    if scheme in _ALAMOUTI:
        g1 = info["w1"] @ h.conj().T  # (blocks, M)
        g2 = info["w2"] @ h.conj().T
        amp = math.sqrt(cfg.power / 2.0)
        for i in range(m):
            yb = y_all[i].reshape(-1, 2)
            g = np.stack([g1[:, i], g2[:, i]], axis=-1)
            z = alamouti_combine(yb, g)
            scale = amp * (np.abs(g1[:, i]) ** 2 + np.abs(g2[:, i]) ** 2)
            det = _nearest_point(z.ravel(), np.repeat(scale, 2), con)
            errors[i] = count_bit_errors(info["symbols"], det, con)
        return errors
    if scheme == "precoded_sm":
        g = h.conj() @ ops.root  # (M, d), row i = (B^H h_i)^*
        tuples = _all_tuples(ops.rank, con.size)
        sym = con.points[tuples]  # (K^d, d)
        flat_tx = info["symbols"].ravel()
        for i in range(m):
            cand = sp * (sym @ g[i])[:, None]
            det = tuples[backend.min_dist_detect(y_all[i][:, None], cand)]
            errors[i] = count_bit_errors(flat_tx, det.ravel(), con)
        return errors
    if scheme == "precoded_qostbc":
        g = ops.root.conj().T @ h.T  # (4, M), column i = B^H h_i
        flat_tx = info["symbols"].ravel()
        for i in range(m):
            yb = y_all[i].reshape(-1, 4)
            det = detect_qostbc(yb, g[:, i], con, cfg.power, cfg.qostbc_detection)
            errors[i] = count_bit_errors(flat_tx, det.ravel(), con)
        return errors
    raise ValueError(f"unknown scheme {scheme!r}")


def _simulate_one_frame(cfg, ops, ch, rng):
    n_bits = frame_bit_count(cfg, ops)
    bits = rng.integers(0, 2, n_bits, dtype=np.uint8)
    x, info = _encode_frame(cfg, ops, bits, rng)
    return _detect_frame(cfg, ops, ch, x, info, rng)


def simulate_worst_user_ber(cfg, ch, n_frames, stream):
    """Uncoded per-user and worst-user BER over seeded multicast frames.

    Frames are independent work units keyed by (stream, frame index) and
    merged by integer error-count summation, so the result is identical
    for any SBF_THREADS worker count.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    ops = _SchemeOps(cfg)
    if ch.n_antennas != ops.n_antennas:
        raise ValueError("channel/covariance dimension mismatch")
    n_bits = frame_bit_count(cfg, ops)

    def run(frame_idx):
        return _simulate_one_frame(cfg, ops, ch, stream.substream(frame_idx))

    workers = min(n_workers(), n_frames)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_frame = list(pool.map(run, range(n_frames)))
    else:
        per_frame = [run(i) for i in range(n_frames)]
    errors = np.sum(per_frame, axis=0)
    total_bits = n_bits * n_frames
    ber = errors / total_bits
    worst = float(ber.max())
    stderr = math.sqrt(max(worst * (1.0 - worst), 0.0) / total_bits)
    diagnostics = {}
    if cfg.scheme in ("precoded_sm", "precoded_qostbc"):
        g = ch.channels.conj() @ ops.root  # (M, d)
        p_stream = np.abs(g) ** 2
        diagnostics["interference_fraction"] = (
            1.0 - p_stream.max(axis=1) / p_stream.sum(axis=1)
        )
    return SimResult(ber, worst, total_bits, stream, stderr, diagnostics)


# ---------------------------------------------------------------------------
# Monte Carlo rate estimation


_RATE_SCHEMES = ("bf", "gauss_sbf", "ellip_sbf", "bf_alamouti",
                 "gauss_sbf_alamouti", "ellip_sbf_alamouti")


def estimate_user_rates_mc(cfg, ch, n_samples, stream, chunk=1 << 16):
    """Per-user empirical ergodic rates E[log(1 + P |h^H w|^2)] (or the
    Alamouti-gain analog) with standard errors; the minimum over users
    estimates the multicast rate.

    Deterministic schemes (bf, bf_alamouti) return the exact rate with
    zero standard error.
    """
    if cfg.scheme not in _RATE_SCHEMES:
        raise ValueError(f"no rate estimator for scheme {cfg.scheme!r}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    ops = _SchemeOps(cfg)
    h = ch.channels
    p = cfg.power
    if cfg.scheme == "bf":
        rate = np.log1p(p * np.abs(h.conj() @ ops.principal) ** 2)
        return rate, np.zeros_like(rate)
    if cfg.scheme == "bf_alamouti":
        g = h.conj() @ ops.bf_pair.T  # (M, 2)
        rate = np.log1p(0.5 * p * np.sum(np.abs(g) ** 2, axis=1))
        return rate, np.zeros_like(rate)
    rng = stream.generator() if isinstance(stream, SeededStream) else stream
    m = h.shape[0]
    acc = np.zeros(m)
    acc2 = np.zeros(m)
    done = 0
    pairwise = cfg.scheme in _ALAMOUTI
    while done < n_samples:
        n = min(chunk, n_samples - done)
        if pairwise:
            w1, w2 = ops.sampler.sample_pair(rng, n)
            gain = 0.5 * (np.abs(w1 @ h.conj().T) ** 2 + np.abs(w2 @ h.conj().T) ** 2)
        else:
            w = ops.sampler.sample(rng, n)
            gain = np.abs(w @ h.conj().T) ** 2  # (n, M)
        vals = np.log1p(p * gain)
        acc += vals.sum(axis=0)
        acc2 += (vals**2).sum(axis=0)
        done += n
    mean = acc / n_samples
    var = np.maximum(acc2 / n_samples - mean**2, 0.0)
    return mean, np.sqrt(var / n_samples)
