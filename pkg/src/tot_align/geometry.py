"""Ground costs and temporal priors between two ordered feature sequences.

Positions are 1-based: row ``i`` of an ``l_a``-long sequence sits at relative
time ``i / l_a``.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_length, check_matrix, check_sequence


def cosine_cost(H, Z):
    r"""Pairwise cosine distance :math:`c_{ij} = 1 - \cos(h_i, z_j)`.

    Parameters
    ----------
    H : array-like, shape (l_a, d)
    Z : array-like, shape (l_t, d)

    Returns
    -------
    C : ndarray, shape (l_a, l_t)
        Entries in [0, 2]. A pair involving a zero-norm row costs exactly 1.
    """
    H = check_sequence(H, "H")
    Z = check_sequence(Z, "Z")
    if H.shape[1] != Z.shape[1]:
        raise ValueError(f"feature dimensions differ: {H.shape[1]} != {Z.shape[1]}")
    nh = np.linalg.norm(H, axis=1)
    nz = np.linalg.norm(Z, axis=1)
    Hn = H / np.where(nh > 0, nh, 1.0)[:, None]
    Zn = Z / np.where(nz > 0, nz, 1.0)[:, None]
    # zero rows normalise to zero vectors, so cos = 0 and cost = 1
    cos = np.clip(Hn @ Zn.T, -1.0, 1.0)
    return 1.0 - cos


def temporal_distance(l_a, l_t):
    """Normalised cross-temporal distance between positions of two sequences.

    ``d[i-1, j-1] = |i/l_a - j/l_t| / sqrt(1/l_a**2 + 1/l_t**2)``.
    """
    l_a = check_length(l_a, "l_a")
    l_t = check_length(l_t, "l_t")
    i = np.arange(1, l_a + 1, dtype=np.float64)[:, None]
    j = np.arange(1, l_t + 1, dtype=np.float64)[None, :]
    # i*l_t - j*l_a is exact in integers, so diagonal cells come out as exact zeros
    num = np.abs(i * l_t - j * l_a) / (l_a * l_t)
    return num / math.sqrt(1.0 / l_a**2 + 1.0 / l_t**2)


@dataclass(frozen=True, eq=False)
class TemporalPrior:
    """Gaussian temporal prior, stored as exact log-densities.

    ``values`` may underflow to zero for small ``sigma`` on long sequences;
    ``log_values`` never does.
    """

    log_values: np.ndarray
    sigma: float

    @property
    def values(self):
        return np.exp(self.log_values)

    @property
    def shape(self):
        return self.log_values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def log_prior(P):
    """Log of a prior given as :class:`TemporalPrior` or a positive matrix."""
    if isinstance(P, TemporalPrior):
        return P.log_values
    P = check_matrix(P, "P")
    if np.any(P <= 0):
        raise ValueError("prior entries must be strictly positive")
    return np.log(P)


def gaussian_prior(l_a, l_t, sigma):
    """Gaussian density of the temporal distance, unnormalised over the grid.

    Entry ``(i, j)`` is ``exp(-d_ij**2 / (2 sigma**2)) / (sigma sqrt(2 pi))``.

    Returns
    -------
    TemporalPrior
    """
    if not sigma > 0 or not math.isfinite(sigma):
        raise ValueError(f"sigma must be a positive finite number, got {sigma!r}")
    d = temporal_distance(l_a, l_t)
    log_p = -(d**2) / (2.0 * sigma**2) - math.log(sigma * math.sqrt(2.0 * math.pi))
    return TemporalPrior(log_p, float(sigma))


def combined_cost_kl(C, P, alpha2):
    """Fold a KL penalty towards the prior ``P`` into the cost: ``C - alpha2 log P``."""
    C = check_matrix(C, "C")
    logP = log_prior(P)
    if logP.shape != C.shape:
        raise ValueError(f"prior has shape {logP.shape}, expected {C.shape}")
    if alpha2 < 0:
        raise ValueError(f"alpha2 must be non-negative, got {alpha2!r}")
    if alpha2 == 0:
        return C.copy()
    return C - alpha2 * logP


def combined_cost_beta(C, beta, l_a=None, l_t=None):
    """Single-parameter temporal cost ``C + beta * d**2``.

    Equal, up to a constant shift, to :func:`combined_cost_kl` with
    ``beta = alpha2 / (2 sigma**2)``.
    """
    C = check_matrix(C, "C")
    if l_a is None:
        l_a = C.shape[0]
    if l_t is None:
        l_t = C.shape[1]
    if C.shape != (l_a, l_t):
        raise ValueError(f"C has shape {C.shape}, expected ({l_a}, {l_t})")
    if not beta >= 0 or not math.isfinite(beta):
        raise ValueError(f"beta must be non-negative, got {beta!r}")
    if beta == 0:
        return C.copy()
    return C + beta * temporal_distance(l_a, l_t) ** 2


def near_diagonal_mass(gamma, band=0.1):
    """Mass of ``gamma`` on cells with ``|i/l_a - j/l_t| <= band``."""
    gamma = np.asarray(gamma, dtype=np.float64)
    l_a, l_t = gamma.shape
    i = np.arange(1, l_a + 1)[:, None]
    j = np.arange(1, l_t + 1)[None, :]
    mask = np.abs(i * l_t - j * l_a) <= band * l_a * l_t + 1e-12
    return float(gamma[mask].sum())
