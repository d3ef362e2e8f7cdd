"""Multicast capacity-optimal transmit covariance.

Solves  max_W min_i h_i^H W h_i  s.t.  W >= 0, tr W = 1  without any SDP
dependency:

  phase 1  plain supergradient ascent (step c/sqrt(k)) along the minimizing
           users' h h^H directions, projecting onto the trace-1 PSD
           spectrahedron (eigendecomposition + simplex projection);
  phase 2  entropy-smoothed objective f_mu(W) = -mu log sum_i exp(-g_i/mu)
           maximized by FISTA with backtracking and adaptive restart,
           tightening mu geometrically.

Convergence is certified, not assumed: the softmin weights q give the dual
upper bound lambda_max(sum_i q_i h_i h_i^H), and the solver stops when
upper bound minus best objective is within tol.  Plain c/sqrt(k) steps
alone cannot certify tolerances near 1e-6 in reasonable iteration counts,
which is why the smoothed polish exists.
"""

import math
from dataclasses import dataclass

import numpy as np

from .sampling import ChannelSet


def project_simplex(v):
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    cond = u - (css - 1.0) / idx > 0
    k = idx[cond][-1]
    tau = (css[cond][-1] - 1.0) / k
    return np.maximum(v - tau, 0.0)


def project_spectrahedron(w):
    """Projection onto {W Hermitian, W >= 0, tr W = 1} (Frobenius metric)."""
    w = 0.5 * (w + w.conj().T)
    lam, v = np.linalg.eigh(w)
    lam = project_simplex(lam)
    return (v * lam) @ v.conj().T


@dataclass(frozen=True)
class CovarianceMatrix:
    """Hermitian PSD transmit covariance with unit trace."""

    entries: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.entries)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("covariance must be square")
        if np.linalg.norm(w - w.conj().T) > 1e-12:
            raise ValueError("covariance not Hermitian (residual > 1e-12)")
        lam = np.linalg.eigvalsh(w)
        if lam[0] < -1e-10:
            raise ValueError(f"covariance has eigenvalue {lam[0]} < -1e-10")
        if abs(np.trace(w).real - 1.0) > 1e-10:
            raise ValueError(f"trace {np.trace(w).real} != 1 (tol 1e-10)")

    @property
    def trace(self):
        return float(np.trace(self.entries).real)


@dataclass(frozen=True)
class McSolution:
    """Solver output: best covariance, its objective min_i h_i^H W h_i, the
    certified dual upper bound and their gap."""

    covariance: CovarianceMatrix
    objective: float
    upper_bound: float
    gap: float
    iterations: int
    converged: bool
    best_objective_history: tuple


def rho_values(w, ch):
    """Quadratic-form gains rho_i = h_i^H W h_i (clipped at 0) and rho_min."""
    entries = w.entries if isinstance(w, CovarianceMatrix) else np.asarray(w)
    h = ch.channels if isinstance(ch, ChannelSet) else np.asarray(ch)
    if h.shape[1] != entries.shape[0]:
        raise ValueError(
            f"dimension mismatch: channels are {h.shape[1]}-dim, covariance {entries.shape[0]}"
        )
    hw = h.conj() @ entries
    rho = np.einsum("ij,ij->i", hw, h).real
    rho = np.maximum(rho, 0.0)
    return rho, float(rho.min())


def _gains(hch, w):
    hw = hch.conj() @ w
    return np.einsum("ij,ij->i", hw, hch).real


def solve_mc_covariance(ch, tol=1e-6, max_iter=100_000):
    """Max-min optimal covariance for a channel set; see module docstring.

    Returns an McSolution; ``converged`` is False when the certified gap is
    still above tol after max_iter iterations (best iterate returned).
    """
    hch = ch.channels.astype(np.complex128)
    m, n = hch.shape
    if m == 1:
        # matched beamforming is the single-user optimum
        h = hch[0]
        w = np.outer(h, h.conj()) / np.linalg.norm(h) ** 2
        obj = float(np.linalg.norm(h) ** 2)
        return McSolution(
            CovarianceMatrix(w), obj, obj, 0.0, 0, True, (obj,)
        )

    hs = np.einsum("ki,kj->kij", hch, hch.conj())
    norms2 = np.einsum("ij,ij->i", hch, hch.conj()).real
    scale = float(norms2.max())

    def dual_ub(q):
        a = np.tensordot(q / q.sum(), hs, axes=1)
        return float(np.linalg.eigvalsh(a)[-1])

    def tighten_dual(q, lb, steps=30):
        """Polyak projected subgradient on the dual min_q lambda_max(A(q)),
        using the primal objective as the known optimum proxy."""
        q = q / q.sum()
        best = dual_ub(q)
        best_q = q
        for _ in range(steps):
            a = np.tensordot(q, hs, axes=1)
            lam, vec = np.linalg.eigh(a)
            val = float(lam[-1])
            if val < best:
                best, best_q = val, q
            u = vec[:, -1]
            d = np.abs(hch.conj() @ u) ** 2
            dn2 = float(d @ d)
            if dn2 <= 0 or val - lb <= 0:
                break
            q = project_simplex(q - ((val - lb) / dn2) * d)
        return best, best_q

    w = np.eye(n, dtype=np.complex128) / n
    best_obj = float(_gains(hch, w).min())
    best_w = w.copy()
    history = [best_obj]
    ub = math.inf
    total_it = 0

    # phase 1: supergradient, c/sqrt(k) steps
    for k in range(1, min(501, max_iter + 1)):
        g = _gains(hch, w)
        fk = float(g.min())
        if fk > best_obj:
            best_obj, best_w = fk, w.copy()
        history.append(best_obj)
        act = g <= fk + 1e-9 * (1.0 + abs(fk))
        grad = hs[act].mean(axis=0)
        w = project_spectrahedron(w + (0.5 * scale / math.sqrt(k)) * grad / scale)
        total_it += 1

    def fmu_grad(wmat, mu):
        g = _gains(hch, wmat)
        gm = g.min()
        q = np.exp(-(g - gm) / mu)
        sq = q.sum()
        f = gm - mu * math.log(sq)
        grad = np.tensordot(q / sq, hs, axes=1)
        return f, grad, g, q / sq

    # phase 2: smoothed FISTA polish with mu homotopy; a stage ends once
    # the smoothed objective stops improving at the mu scale (there is no
    # value polishing past the smoothing error mu*log M)
    w = best_w.copy()
    mu = 0.05 * scale
    lest = scale**2 / mu
    check_every = 50
    min_stage = 300
    while total_it < max_iter:
        y = w.copy()
        w_prev = w.copy()
        f_prev = -math.inf
        f_window = -math.inf
        t_mom = 1.0
        stage_it = 0
        while stage_it < 4000 and total_it < max_iter:
            f_y, grad, _, _ = fmu_grad(y, mu)
            step = 1.0 / lest
            w_new = y
            for _ in range(60):
                w_new = project_spectrahedron(y + step * grad)
                f_new, _, _, _ = fmu_grad(w_new, mu)
                d = w_new - y
                model = f_y + np.vdot(grad, d).real - 0.5 / step * np.linalg.norm(d) ** 2
                if f_new >= model - 1e-15 * abs(f_y):
                    break
                step *= 0.5
                lest = 1.0 / step
            lest = max(lest * 0.9, 1e-12)
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom**2))
            y = w_new + ((t_mom - 1.0) / t_new) * (w_new - w_prev)
            if f_new < f_prev:  # adaptive restart
                y = w_new.copy()
                t_new = 1.0
            w_prev, f_prev, t_mom = w_new, f_new, t_new
            stage_it += 1
            total_it += 1
            if stage_it % check_every == 0:
                _, _, g, q = fmu_grad(w_new, mu)
                fk = float(g.min())
                if fk > best_obj:
                    best_obj, best_w = fk, w_new.copy()
                history.append(best_obj)
                ub = min(ub, dual_ub(q))
                if ub - best_obj <= tol:
                    w_final = project_spectrahedron(best_w)
                    return McSolution(
                        CovarianceMatrix(w_final),
                        best_obj,
                        ub,
                        ub - best_obj,
                        total_it,
                        True,
                        tuple(history),
                    )
                if stage_it >= min_stage and f_new - f_window < 1e-6 * mu:
                    break
                f_window = f_new
        w = w_prev
        _, _, g, q = fmu_grad(w, mu)
        fk = float(g.min())
        if fk > best_obj:
            best_obj, best_w = fk, w.copy()
        history.append(best_obj)
        ub = min(ub, tighten_dual(q, best_obj)[0])
        if ub - best_obj <= tol or mu < 1e-14 * scale:
            break
        mu *= 0.25
        lest = max(scale**2 / mu * 1e-3, 1e-12)

    w_final = project_spectrahedron(best_w)
    gap = ub - best_obj
    return McSolution(
        CovarianceMatrix(w_final),
        best_obj,
        ub,
        gap,
        total_it,
        gap <= tol,
        tuple(history),
    )
