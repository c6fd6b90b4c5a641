"""Seeded synthetic sequence pairs with a known monotone correspondence.

Everything is drawn from :class:`SplitMix64` so fixtures are reproducible
on any platform and in any language:

* state is one unsigned 64-bit integer, initialised to ``seed mod 2**64``;
* each step adds ``0x9E3779B97F4A7C15`` to the state, then mixes
  ``z = state``; ``z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9``;
  ``z = (z ^ (z >> 27)) * 0x94D049BB133111EB``; ``z ^= z >> 31``
  (all arithmetic mod 2**64) and outputs ``z``;
* a uniform float in [0, 1) is ``(z >> 11) * 2**-53``;
* standard normals come in pairs from Box-Muller on two uniforms
  ``u1, u2``: ``r = sqrt(-2 ln(1 - u1))``, first ``r cos(2 pi u2)``, then
  ``r sin(2 pi u2)``;
* a uniform integer in ``[lo, hi)`` is ``lo + floor(u * (hi - lo))``.

Draw order for :func:`make_pair`: the linguistic matrix row-major, then
the acoustic noise row-major, then the interior token ids, then the
adapter weights (fc3, fc1 weight/bias, each row-major).
"""

import math
from dataclasses import dataclass

import numpy as np

from .transfer import AdapterWeights, TokenSequence

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = int(seed) & _MASK
        self._spare = None

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self):
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self):
        if self._spare is not None:
            out, self._spare = self._spare, None
            return out
        u1, u2 = self.uniform(), self.uniform()
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normals(self, rows, cols):
        return np.array([[self.normal() for _ in range(cols)] for _ in range(rows)])

    def integer(self, lo, hi):
        return lo + int(self.uniform() * (hi - lo))


def ground_truth(length_a, length_t, warp=True):
    """1-based token index for each acoustic frame: ``ceil(i * l_t / l_a)``."""
    if not warp and length_a != length_t:
        raise ValueError("without warping the two lengths must be equal")
    return [-(-i * length_t // length_a) for i in range(1, length_a + 1)]


@dataclass
class SyntheticPair:
    acoustic: np.ndarray
    linguistic: np.ndarray
    labels: TokenSequence
    weights: AdapterWeights
    alignment: list


def make_pair(length_a, length_t, dim, seed, warp=True, noise=0.1, vocab_size=8, s=0.1):
    """Generate a linguistic sequence and a monotonically stretched noisy acoustic copy.

    Acoustic frame ``i`` is the linguistic row ``ground_truth(...)[i-1]`` plus
    ``noise`` times a standard normal vector. The labels are
    ``[CLS, t_2, ..., t_{l_t - 1}, SEP]`` with CLS = ``vocab_size - 2``,
    SEP = ``vocab_size - 1`` and interior ids drawn from ``[1, vocab_size - 2)``
    (0 is the CTC blank). The adapter keeps FC2 as the identity so the
    acoustic file is already in the linguistic width.
    """
    for name, v in (("length_a", length_a), ("length_t", length_t), ("dim", dim)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    if length_t < 2:
        raise ValueError("length_t must be at least 2 to hold CLS and SEP")
    if vocab_size < 4:
        raise ValueError("vocab_size must be at least 4 (blank, one token, CLS, SEP)")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    align = ground_truth(length_a, length_t, warp)
    rng = SplitMix64(seed)
    Z = rng.normals(length_t, dim)
    H = Z[np.array(align) - 1] + noise * rng.normals(length_a, dim)
    cls_id, sep_id = vocab_size - 2, vocab_size - 1
    interior = [rng.integer(1, vocab_size - 2) for _ in range(length_t - 2)]
    labels = TokenSequence([cls_id, *interior, sep_id], cls_id, sep_id)

    scale = 1.0 / math.sqrt(dim)
    weights = AdapterWeights(
        fc2_weight=np.eye(dim),
        fc2_bias=np.zeros(dim),
        fc3_weight=scale * rng.normals(dim, dim),
        fc3_bias=np.zeros(dim),
        fc1_weight=scale * rng.normals(vocab_size, dim),
        fc1_bias=0.1 * rng.normals(1, vocab_size).ravel(),
        ln1_gain=np.ones(dim),
        ln1_bias=np.zeros(dim),
        ln2_gain=np.ones(dim),
        ln2_bias=np.zeros(dim),
        s=s,
    )
    return SyntheticPair(H, Z, labels, weights, align)
