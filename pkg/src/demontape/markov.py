"""Joint demon/bit generator and its exact propagator.

Joint states are ordered ``(0u, 0d, 1u, 1d)``.  The generator uses the
column convention: ``R[i, j]`` is the rate of the jump ``j -> i`` and each
column sums to zero, so ``dP/dt = R @ P``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .params import Params

STATES = ("0u", "0d", "1u", "1d")
I0U, I0D, I1U, I1D = range(4)

# (source, target) pairs of every allowed jump
EDGES = ((I0U, I0D), (I0D, I0U), (I1U, I1D), (I1D, I1U), (I1U, I0D), (I0D, I1U))

NEG_CLAMP = 1e-13
COND_LIMIT = 1e8


class PropagationError(RuntimeError):
    pass


class Spectrum(NamedTuple):
    """Eigenvalues sorted descending with matching right eigenvectors (columns)."""

    values: np.ndarray
    vectors: np.ndarray


def build_rate_matrix(params: Params) -> np.ndarray:
    g, s, w = params.gamma, params.sigma, params.omega
    R = np.zeros((4, 4))
    down, up = g * (1.0 + s), g * (1.0 - s)
    R[I0D, I0U] = R[I1D, I1U] = down
    R[I0U, I0D] = R[I1U, I1D] = up
    # cooperative flip: 1u -> 0d releases a bit-1 into bit-0 via the cold bath
    R[I0D, I1U] = 1.0 + w
    R[I1U, I0D] = 1.0 - w
    R[np.diag_indices(4)] = -R.sum(axis=0)
    return R


def check_rate_matrix(R: np.ndarray) -> None:
    R = np.asarray(R, dtype=float)
    if R.shape != (4, 4) or not np.all(np.isfinite(R)):
        raise ValueError("rate matrix must be a finite 4x4 array")
    off = R - np.diag(np.diag(R))
    if np.any(off < 0):
        raise ValueError("negative off-diagonal rate")
    if np.max(np.abs(R.sum(axis=0))) > 1e-14 * max(1.0, np.abs(R).max()):
        raise ValueError("columns of the generator do not sum to zero")


def joint_product(d_up: float, p0: float) -> np.ndarray:
    """Product distribution of demon P(u) = d_up and bit P(0) = p0."""
    p1 = 1.0 - p0
    return np.array([d_up * p0, (1.0 - d_up) * p0, d_up * p1, (1.0 - d_up) * p1])


def bit_marginal(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P)
    return np.array([P[..., I0U] + P[..., I0D], P[..., I1U] + P[..., I1D]])


def demon_up(P: np.ndarray) -> float:
    return P[..., I0U] + P[..., I1U]


def check_joint(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.shape != (4,) or not np.all(np.isfinite(P)):
        raise ValueError("joint distribution must be a finite 4-vector")
    if np.any(P < -NEG_CLAMP) or np.any(P > 1 + NEG_CLAMP):
        raise ValueError(f"components outside [0, 1]: {P}")
    if abs(P.sum() - 1.0) > 1e-12:
        raise ValueError(f"components sum to {P.sum()!r}, not 1")
    return P


def stationary_distribution(R: np.ndarray) -> np.ndarray:
    """Null vector of ``R`` normalised to a probability vector.

    The transition graph is the path ``0u - 0d - 1u - 1d``, so stationarity
    reduces to detailed balance along consecutive edges.
    """
    R = np.asarray(R, dtype=float)
    chain = (I0U, I0D, I1U, I1D)
    w = np.ones(4)
    for a, b in zip(chain[:-1], chain[1:]):
        fwd, back = R[b, a], R[a, b]
        if fwd <= 0 or back <= 0:
            raise ValueError("transition graph is disconnected; no unique stationary state")
        w[b] = w[a] * fwd / back
    return w / w.sum()


def _symmetrizer(R: np.ndarray):
    pi = stationary_distribution(R)
    root = np.sqrt(pi)
    S = R * (1.0 / root)[:, None] * root[None, :]
    return 0.5 * (S + S.T), root, pi


def eigen_spectrum(R: np.ndarray) -> Spectrum:
    R = np.asarray(R, dtype=float)
    vals, vecs = np.linalg.eig(R)
    if np.any(~np.isfinite(vals)):
        raise np.linalg.LinAlgError("eigensolve did not converge")
    if np.max(np.abs(vals.imag)) > 1e-10:
        raise np.linalg.LinAlgError(f"complex spectrum: {vals}")
    vals, vecs = vals.real, vecs.real
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    vals[0] = 0.0 if abs(vals[0]) < 1e-10 else vals[0]
    return Spectrum(vals, vecs)


def expm_spectral(R: np.ndarray, tau: float) -> np.ndarray:
    """exp(R tau) through the symmetrised eigenproblem; None if ill-conditioned."""
    S, root, pi = _symmetrizer(R)
    if root.max() / root.min() > COND_LIMIT:
        return None
    lam, V = np.linalg.eigh(S)
    return (root[:, None] * V) @ (np.exp(lam * tau)[:, None] * (V.T / root[None, :]))


def expm_dense(R: np.ndarray, tau: float) -> np.ndarray:
    """exp(R tau) by Pade scaling and squaring."""
    return scipy.linalg.expm(np.asarray(R, dtype=float) * tau)


def transition_matrix(R: np.ndarray, tau: float) -> np.ndarray:
    E = expm_spectral(R, tau)
    if E is None:
        E = expm_dense(R, tau)
    return E


def clean_distribution(P: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(P)):
        raise PropagationError("non-finite propagated distribution")
    if np.any(P < -NEG_CLAMP):
        raise PropagationError(f"propagated distribution went negative: {P}")
    if abs(P.sum() - 1.0) > 1e-12:
        raise PropagationError(f"probability not conserved: sum={P.sum()!r}")
    if np.any(P < 0):
        P = np.clip(P, 0.0, None)
        P = P / P.sum()
    return P


def propagate(R: np.ndarray, P0: np.ndarray, tau: float) -> np.ndarray:
    """Solve the master equation over ``tau`` from ``P0``."""
    if not tau >= 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    P0 = check_joint(P0)
    if tau == 0:
        return P0.copy()
    return clean_distribution(transition_matrix(R, tau) @ P0)
