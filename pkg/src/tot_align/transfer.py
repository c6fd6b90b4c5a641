"""Cross-modal projection, adapter fusion and the combined training objective.

Affine maps follow the ``x @ W.T + b`` convention, so a map from ``d_in`` to
``d_out`` stores ``W`` with shape (d_out, d_in).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax, logsumexp, softmax

from ._validation import check_matrix, check_sequence
from .sinkhorn import Coupling, SinkhornConfig, entropy, ot_objective, tot_cost, sinkhorn

LN_EPS = 1e-5
DEFAULT_LAMBDA = 0.3
DEFAULT_W = 1.0


@dataclass(frozen=True, eq=False)
class AdapterWeights:
    """Parameters of the adapter branch and the output layer.

    ``fc2`` maps acoustic (d_a) to linguistic (d_t) width, ``fc3`` maps back,
    ``fc1`` produces vocabulary logits. ``ln1_*`` normalise the d_t-wide
    feature before ``fc3``; ``ln2_*`` normalise its d_a-wide output.
    """

    fc2_weight: np.ndarray
    fc2_bias: np.ndarray
    fc3_weight: np.ndarray
    fc3_bias: np.ndarray
    fc1_weight: np.ndarray
    fc1_bias: np.ndarray
    ln1_gain: np.ndarray
    ln1_bias: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray
    s: float = 1.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if name == "s":
                continue
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)
        if not (self.s >= 0 and math.isfinite(self.s)):
            raise ValueError(f"s must be non-negative, got {self.s!r}")
        d_t, d_a = self.fc2_weight.shape
        vocab = self.fc1_weight.shape[0]
        expected = {
            "fc2_bias": (d_t,),
            "fc3_weight": (d_a, d_t),
            "fc3_bias": (d_a,),
            "fc1_weight": (vocab, d_a),
            "fc1_bias": (vocab,),
            "ln1_gain": (d_t,),
            "ln1_bias": (d_t,),
            "ln2_gain": (d_a,),
            "ln2_bias": (d_a,),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, expected {shape}")

    @property
    def d_a(self):
        return self.fc2_weight.shape[1]

    @property
    def d_t(self):
        return self.fc2_weight.shape[0]

    @property
    def vocab_size(self):
        return self.fc1_weight.shape[0]

    def replace_s(self, s):
        kwargs = {name: getattr(self, name) for name in self.__dataclass_fields__}
        kwargs["s"] = s
        return AdapterWeights(**kwargs)


@dataclass(frozen=True)
class TokenSequence:
    """Token ids framed by CLS and SEP sentinels."""

    ids: tuple
    cls_id: int
    sep_id: int

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
        if len(self.ids) < 2 or self.ids[0] != self.cls_id or self.ids[-1] != self.sep_id:
            raise ValueError("token sequence must start with CLS and end with SEP")

    @property
    def interior(self):
        """Ids with the CLS/SEP framing removed (the CTC target)."""
        return self.ids[1:-1]

    def __len__(self):
        return len(self.ids)


@dataclass
class LossReport:
    """Component losses for one sequence pair.

    ``total`` is ``None`` when the CTC alignment is infeasible.
    """

    ctc: float | None
    align: float
    tot: float
    total: float | None
    lam: float = DEFAULT_LAMBDA
    w: float = DEFAULT_W
    ctc_feasible: bool = True
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self):
        out = {
            "ctc": self.ctc,
            "ctc_feasible": self.ctc_feasible,
            "align": self.align,
            "tot": self.tot,
            "lambda": self.lam,
            "w": self.w,
            "diagnostics": dict(self.diagnostics),
        }
        if self.total is not None:
            out["total"] = self.total
        return out


def project(gamma, H):
    """Barycentric projection of ``H`` onto the column side of ``gamma``.

    Row ``j`` of the result is ``sum_i gamma_ij h_i / b_j``, i.e. the
    average of ``H`` under the conditional distribution of column ``j``.
    """
    if isinstance(gamma, Coupling):
        plan, b = gamma.plan, gamma.b
    else:
        plan = check_matrix(gamma, "gamma")
        b = plan.sum(axis=0)
    H = check_sequence(H, "H")
    if plan.shape[0] != H.shape[0]:
        raise ValueError(f"coupling has {plan.shape[0]} rows but H has {H.shape[0]}")
    if np.any(b <= 0):
        raise ValueError("coupling has a column with zero mass")
    return (plan.T @ H) / b[:, None]


def _row_cosine(X, Y):
    nx = np.linalg.norm(X, axis=1)
    ny = np.linalg.norm(Y, axis=1)
    dots = np.einsum("ij,ij->i", X, Y)
    denom = nx * ny
    cos = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
    return np.clip(cos, -1.0, 1.0)


def alignment_loss(Z_proj, Z):
    """Sum of ``1 - cos`` over matching rows, skipping the first and last (CLS/SEP)."""
    Z_proj = check_sequence(Z_proj, "Z_proj")
    Z = check_sequence(Z, "Z")
    if Z_proj.shape != Z.shape:
        raise ValueError(f"shape mismatch: {Z_proj.shape} vs {Z.shape}")
    if Z.shape[0] < 3:
        raise ValueError("alignment loss needs at least 3 rows (CLS, token, SEP)")
    return float(np.sum(1.0 - _row_cosine(Z_proj[1:-1], Z[1:-1])))


def layer_norm(X, gain, bias, eps=LN_EPS):
    mean = X.mean(axis=1, keepdims=True)
    var = X.var(axis=1, keepdims=True)
    return (X - mean) / np.sqrt(var + eps) * gain + bias


def adapter_forward(H_ca, weights):
    """Run the adapter on encoder output ``H_ca``.

    Returns
    -------
    H_a : ndarray, shape (l_a, d_t)
        Width-matched feature fed to the transport step.
    H_fused : ndarray, shape (l_a, d_a)
        ``H_ca + s * LN(FC3(LN(H_a)))``.
    """
    H_ca = check_sequence(H_ca, "H_ca")
    if H_ca.shape[1] != weights.d_a:
        raise ValueError(f"H_ca has width {H_ca.shape[1]}, adapter expects {weights.d_a}")
    H_a = H_ca @ weights.fc2_weight.T + weights.fc2_bias
    if weights.s == 0:
        return H_a, H_ca.copy()
    hat = layer_norm(H_a, weights.ln1_gain, weights.ln1_bias) @ weights.fc3_weight.T + weights.fc3_bias
    return H_a, H_ca + weights.s * layer_norm(hat, weights.ln2_gain, weights.ln2_bias)


def _logits(H_fused, weights):
    H_fused = check_sequence(H_fused, "H_fused")
    if H_fused.shape[1] != weights.d_a:
        raise ValueError(f"H_fused has width {H_fused.shape[1]}, expected {weights.d_a}")
    return H_fused @ weights.fc1_weight.T + weights.fc1_bias


def softmax_predict(H_fused, weights):
    """Per-frame token distribution, shape (l_a, vocab_size)."""
    return softmax(_logits(H_fused, weights), axis=1)


def ctc_min_frames(labels):
    """Fewest frames that can emit ``labels``: one per token plus a blank between repeats."""
    labels = list(labels)
    repeats = sum(1 for x, y in zip(labels, labels[1:]) if x == y)
    return len(labels) + repeats


def ctc_loss(log_probs, labels, blank=0):
    """Negative log-likelihood of ``labels`` under CTC.

    Forward recursion in log space over the blank-augmented label sequence.
    Returns ``math.inf`` when ``labels`` cannot be emitted in ``T`` frames;
    use :func:`ctc_min_frames` to test feasibility without the sentinel.

    Parameters
    ----------
    log_probs : array-like, shape (T, V)
        Per-frame log-distributions.
    labels : sequence of int
        Target ids, none equal to ``blank``.
    blank : int
    """
    lp = check_matrix(log_probs, "log_probs")
    T, V = lp.shape
    labels = [int(x) for x in labels]
    if not 0 <= blank < V:
        raise ValueError(f"blank id {blank} outside vocabulary of size {V}")
    if any(x == blank for x in labels):
        raise ValueError("labels must not contain the blank id")
    if any(not 0 <= x < V for x in labels):
        raise ValueError(f"label ids must lie in [0, {V})")
    if np.max(np.abs(logsumexp(lp, axis=1))) > 1e-6:
        raise ValueError("log_probs rows must be normalised log-distributions")
    if ctc_min_frames(labels) > T:
        return math.inf

    ext = [blank]
    for x in labels:
        ext += [x, blank]
    S = len(ext)
    ext = np.array(ext)
    # s may also jump from s-2 when ext[s] is a token differing from ext[s-2]
    skip = np.zeros(S, dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])

    alpha = np.full(S, -np.inf)
    alpha[0] = lp[0, ext[0]]
    if S > 1:
        alpha[1] = lp[0, ext[1]]
    prev1 = np.full(S, -np.inf)
    prev2 = np.full(S, -np.inf)
    for t in range(1, T):
        prev1[1:] = alpha[:-1]
        prev2[2:] = np.where(skip[2:], alpha[:-2], -np.inf)
        alpha = np.logaddexp(np.logaddexp(alpha, prev1), prev2) + lp[t, ext]
    ll = alpha[-1] if S == 1 else np.logaddexp(alpha[-1], alpha[-2])
    return float(max(-ll, 0.0))


def total_loss(ctc, align, tot, lam=DEFAULT_LAMBDA, w=DEFAULT_W):
    """Combine the branch losses as ``lam * ctc + (1 - lam) * w * (align + tot)``."""
    if not 0 <= lam <= 1:
        raise ValueError(f"lambda must lie in [0, 1], got {lam!r}")
    if w < 0:
        raise ValueError(f"w must be non-negative, got {w!r}")
    if not math.isfinite(ctc):
        raise ValueError("ctc loss is not finite; the alignment is infeasible")
    total = lam * ctc + (1 - lam) * w * (align + tot)
    return LossReport(ctc=ctc, align=align, tot=tot, total=total, lam=lam, w=w)


def evaluate_pair(H_ca, Z, labels, weights, beta=0.5, config=None,
                  lam=DEFAULT_LAMBDA, w=DEFAULT_W, blank=0):
    """Evaluate both branches on one (acoustic, linguistic) pair.

    The transport step couples ``FC2(H_ca)`` with the full ``Z`` (CLS and SEP
    rows included). The reported ``tot`` term is the transported cost
    ``<gamma, C + beta d^2>``; its entropy-regularised value is kept in the
    diagnostics.
    """
    config = config or SinkhornConfig()
    Z = check_sequence(Z, "Z")
    if not isinstance(labels, TokenSequence):
        raise TypeError("labels must be a TokenSequence")
    H_a, H_fused = adapter_forward(H_ca, weights)
    C = tot_cost(H_a, Z, beta)
    gamma = sinkhorn(C, config=config)
    align = alignment_loss(project(gamma, H_a), Z)
    tot = ot_objective(gamma, C)

    log_probs = log_softmax(_logits(H_fused, weights), axis=1)
    target = labels.interior
    diagnostics = {
        "converged": gamma.converged,
        "n_iter": gamma.n_iter,
        "marginal_violation": gamma.violation,
        "epsilon": gamma.epsilon,
        "stabilized": gamma.stabilized,
        "beta": beta,
        "tot_regularized": tot - gamma.epsilon * entropy(gamma),
    }
    if ctc_min_frames(target) > log_probs.shape[0]:
        if not 0 <= lam <= 1:
            raise ValueError(f"lambda must lie in [0, 1], got {lam!r}")
        return LossReport(ctc=None, align=align, tot=tot, total=None, lam=lam, w=w,
                          ctc_feasible=False, diagnostics=diagnostics)
    report = total_loss(ctc_loss(log_probs, target, blank), align, tot, lam, w)
    report.diagnostics = diagnostics
    return report
