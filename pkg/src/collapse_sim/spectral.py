"""Statistical matrix of the weight ensemble and its relaxation spectrum.

Column m of S holds the one-step transition probabilities out of weight
m*eps, so an ensemble distribution evolves as phi(t + tau) = S phi(t).
Columns 0 and M are absorbing. Ordering the states as (interior, boundary)
makes S block lower-triangular, so its spectrum is {1, 1} plus the spectrum
of the interior tridiagonal block, which is diagonally similar to a
symmetric matrix whenever all interior moves have positive probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eig, eigh_tridiagonal

from .walk import WalkGrid, combined_scheme, transition_probs

__all__ = [
    "StatMatrix",
    "SpectralResult",
    "build_stat_matrix",
    "eigen_spectrum",
    "relaxation_times",
    "evolve_distribution",
    "asymptotic_selection_time",
]


@dataclass(frozen=True)
class StatMatrix:
    """Tridiagonal column-stochastic matrix in band form.

    ``loss[m]`` = S[m-1, m], ``stay[m]`` = S[m, m], ``gain[m]`` = S[m+1, m].
    """

    eps: float
    loss: np.ndarray
    stay: np.ndarray
    gain: np.ndarray

    @property
    def M(self) -> int:
        return len(self.stay) - 1

    @property
    def dimension(self) -> int:
        return len(self.stay)

    def dense(self) -> np.ndarray:
        n = self.dimension
        S = np.diag(self.stay)
        idx = np.arange(1, n)
        S[idx - 1, idx] = self.loss[1:]
        S[idx, idx - 1] = self.gain[:-1]
        return S

    def apply(self, phi: np.ndarray) -> np.ndarray:
        out = self.stay * phi
        out[:-1] += self.loss[1:] * phi[1:]
        out[1:] += self.gain[:-1] * phi[:-1]
        return out


@dataclass
class SpectralResult:
    """Eigenvalues sorted descending, with matching left/right eigenvectors.

    ``right[:, k]`` has unit Euclidean norm and ``left[k] @ right[:, k] == 1``.
    """

    eigenvalues: np.ndarray
    right: Optional[np.ndarray] = None
    left: Optional[np.ndarray] = None
    tau: float = 1.0
    relaxation: np.ndarray = field(init=False)

    def __post_init__(self):
        self.relaxation = relaxation_times(self, self.tau)

    @property
    def selection_time(self) -> float:
        """Largest finite relaxation time (the quantum-selection time)."""
        return float(self.relaxation.max()) if len(self.relaxation) else 0.0


def build_stat_matrix(eps: float) -> StatMatrix:
    grid = WalkGrid(eps)
    M = grid.M
    scheme = combined_scheme(eps)
    loss = np.zeros(M + 1)
    stay = np.zeros(M + 1)
    gain = np.zeros(M + 1)
    for m in range(M + 1):
        p, q, r = transition_probs(m / M, scheme)
        loss[m], stay[m], gain[m] = p, q, r
    return StatMatrix(eps, loss, stay, gain)


def _interior_eigs(S: StatMatrix):
    """Eigenpairs of the interior block A = S[1:M, 1:M] (right, left vectors)."""
    d = S.stay[1:-1]
    up = S.loss[2:-1]  # A[i, i+1]
    down = S.gain[1:-2]  # A[i+1, i]
    n = len(d)
    if n == 1:
        return d.copy(), np.ones((1, 1)), np.ones((1, 1))
    prod = up * down
    if np.all(prod > 0.0):
        # D^{-1} A D symmetric with D_{i+1}/D_i = sqrt(down_i / up_i)
        off = np.sqrt(prod)
        lam, V = eigh_tridiagonal(d, off)
        logD = np.concatenate(([0.0], np.cumsum(0.5 * (np.log(down) - np.log(up)))))
        logD -= logD.max()
        D = np.exp(logD)
        right = D[:, None] * V
        left = (V / D[:, None]).T
        return lam, right, left
    A = S.dense()[1:-1, 1:-1]
    lam, vl, vr = eig(A, left=True, right=True)
    if np.max(np.abs(lam.imag)) > 1e-9:
        raise np.linalg.LinAlgError("interior block has a complex spectrum")
    return lam.real, vr.real, vl.real.T


def eigen_spectrum(S: StatMatrix, tau: float = 1.0) -> SpectralResult:
    """Full spectrum of S with biorthonormal left/right eigenvectors."""
    M = S.M
    n = M + 1
    lam_int, r_int, l_int = _interior_eigs(S)
    if not np.all(np.isfinite(lam_int)):
        raise np.linalg.LinAlgError("eigensolver returned non-finite eigenvalues")

    lams = [1.0, 1.0]
    R = np.zeros((n, n))
    L = np.zeros((n, n))
    # absorbing pair: right vectors are the boundary basis vectors, left
    # vectors the absorption probabilities into 0 and into M
    x = np.arange(n) / M
    R[0, 0] = 1.0
    L[0] = 1.0 - x
    R[M, 1] = 1.0
    L[1] = x
    for j, lam in enumerate(lam_int):
        k = j + 2
        v = np.zeros(n)
        v[1:M] = r_int[:, j]
        # boundary rows: b = S[b, interior] v / (lam - 1)
        v[0] = S.loss[1] * r_int[0, j] / (lam - 1.0)
        v[M] = S.gain[M - 1] * r_int[-1, j] / (lam - 1.0)
        v /= np.linalg.norm(v)
        u = np.zeros(n)
        u[1:M] = l_int[j]
        u /= u @ v
        lams.append(float(lam))
        R[:, k] = v
        L[k] = u
    lams = np.asarray(lams)
    order = np.argsort(-lams, kind="stable")
    return SpectralResult(lams[order], R[:, order], L[order], tau)


def relaxation_times(result: SpectralResult, tau: float) -> np.ndarray:
    """T_k = -tau / ln|lambda_k| for every eigenvalue other than the unit pair.

    lambda = 0 maps to T = 0. A negative eigenvalue decays with an
    alternating sign; its time uses |lambda|.
    """
    lam = np.asarray(result.eigenvalues)[2:]
    out = np.zeros(len(lam))
    a = np.abs(lam)
    nz = a > 0.0
    out[nz] = -tau / np.log(a[nz])
    return out


def asymptotic_selection_time(eps: float, tau: float = 1.0) -> float:
    """Large-M estimate tau / (2 eps^2)."""
    return tau / (2.0 * eps * eps)


def evolve_distribution(S: StatMatrix, phi0, steps: int) -> np.ndarray:
    """S^steps phi0 by repeated tridiagonal products."""
    phi = np.array(phi0, dtype=float)
    if phi.shape != (S.dimension,):
        raise ValueError(f"distribution must have {S.dimension} entries")
    if np.any(phi < 0.0) or abs(math.fsum(phi) - 1.0) > 1e-12:
        raise ValueError("phi0 must be non-negative and sum to 1")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    for _ in range(steps):
        phi = S.apply(phi)
    return phi
