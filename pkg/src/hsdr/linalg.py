"""Covariance estimation and symmetric eigendecomposition.

The eigensolver is a cyclic Jacobi method using the round-robin (Brent-Luk)
pair ordering: every round rotates n/2 disjoint index pairs at once, which
vectorizes cleanly in numpy while staying fully deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, NoConvergence, NonFinite, NotSymmetric

SYMMETRY_ATOL = 1e-9
DEFAULT_MAX_SWEEPS = 100
DEFAULT_REL_TOL = 1e-12


@dataclass(frozen=True)
class CovarianceStats:
    """Sample count, mean spectrum and population covariance of a pixel set."""

    count: int
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in non-increasing order; column ``i`` of ``eigenvectors`` pairs with ``eigenvalues[i]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.T


def _as_finite_2d(a, name="samples") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name} contains NaN or Inf")
    return arr


def covariance(samples) -> CovarianceStats:
    """Mean and covariance of the rows of ``samples``.

    The covariance is normalized by M (population form), not M - 1.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"samples must be 2-D, got shape {x.shape}")
    if x.shape[0] == 0:
        raise EmptyInput("covariance of zero samples")
    x = _as_finite_2d(x)
    m = x.shape[0]
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / m
    cov = 0.5 * (cov + cov.T)
    return CovarianceStats(count=m, mean=mean, covariance=cov)


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pair schedule covering every (p, q) exactly once over n - 1 rounds (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        a = np.array(players[:half])
        b = np.array(players[::-1][:half])
        p = np.minimum(a, b)
        q = np.maximum(a, b)
        rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def _rotation(app, aqq, apq):
    c = np.ones_like(apq)
    s = np.zeros_like(apq)
    active = apq != 0.0
    if not np.any(active):
        return c, s, active
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        theta = (aqq[active] - app[active]) / (2.0 * apq[active])
        big = np.abs(theta) > 1e150
        t = np.where(
            big,
            0.5 / theta,
            np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0)),
        )
    # sign(0) = 0 would stall the rotation when the diagonal entries coincide
    t = np.where(theta == 0.0, 1.0, t)
    cc = 1.0 / np.sqrt(t * t + 1.0)
    c[active] = cc
    s[active] = t * cc
    return c, s, active


def canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive (lowest index wins ties)."""
    out = vectors.copy()
    mags = np.abs(out)
    peak = mags.max(axis=0)
    for j in range(out.shape[1]):
        if peak[j] == 0.0:
            continue
        idx = int(np.flatnonzero(mags[:, j] >= peak[j] * (1.0 - 1e-12))[0])
        if out[idx, j] < 0:
            out[:, j] = -out[:, j]
    return out


def eigh_symmetric(c, max_sweeps: int = DEFAULT_MAX_SWEEPS, tol: float = DEFAULT_REL_TOL) -> EigenDecomposition:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    c : array_like of shape (L, L)
        Symmetric within an absolute tolerance of 1e-9.
    max_sweeps : int
        Iteration cap; each sweep visits every off-diagonal pair once.
    tol : float
        Stop once the off-diagonal Frobenius norm is at most ``tol * ||c||_F``.

    Returns
    -------
    EigenDecomposition
        Eigenvalues sorted non-increasing. Eigenvector signs are fixed so the
        largest-magnitude entry of each column is positive.
    """
    a = np.array(c, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix contains NaN or Inf")
    asym = np.max(np.abs(a - a.T))
    if asym > SYMMETRY_ATOL:
        raise NotSymmetric(f"matrix asymmetry {asym:.3e} exceeds {SYMMETRY_ATOL:g}")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    vt = np.eye(n)  # eigenvectors stored as rows

    target = tol * float(np.linalg.norm(a))
    if n > 1 and _off_norm(a) > target:
        padded = n + (n % 2)
        schedule = []
        for p, q in _round_robin(padded):
            keep = q < n
            schedule.append((p[keep], q[keep]))
        converged = False
        for _ in range(max_sweeps):
            for p, q in schedule:
                apq = a[p, q]
                c_, s_, active = _rotation(a[p, p], a[q, q], apq)
                if not np.any(active):
                    continue
                p, q, c_, s_ = p[active], q[active], c_[active], s_[active]
                cr = c_[:, None]
                sr = s_[:, None]
                # A <- J^T A J as two row passes; rows are contiguous, columns are not
                for _pass in range(2):
                    ap = a[p, :]
                    aq = a[q, :]
                    a[p, :] = cr * ap - sr * aq
                    a[q, :] = sr * ap + cr * aq
                    a = np.ascontiguousarray(a.T)
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = vt[p, :]
                vq = vt[q, :]
                vt[p, :] = cr * vp - sr * vq
                vt[q, :] = sr * vp + cr * vq
            if _off_norm(a) <= target:
                converged = True
                break
        if not converged:
            raise NoConvergence(
                f"Jacobi did not converge in {max_sweeps} sweeps "
                f"(off-diagonal norm {_off_norm(a):.3e}, target {target:.3e})"
            )

    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(eigenvalues=w[order], eigenvectors=canonical_signs(vt.T[:, order]))


def symmetric_power(c, power: float, floor: float = 0.0) -> np.ndarray:
    """``c ** power`` for symmetric PSD ``c``, clamping eigenvalues below ``floor``."""
    dec = eigh_symmetric(c)
    lam = np.maximum(dec.eigenvalues, floor)
    if power < 0 and np.any(lam <= 0):
        raise NonFinite("negative power of a singular matrix")
    u = dec.eigenvectors
    return (u * lam**power) @ u.T
