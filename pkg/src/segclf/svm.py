"""RBF-kernel C-SVC trained with sequential minimal optimization.

The binary solver maximizes the standard soft-margin dual

    W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t.  0 <= a_i <= C,  sum_i a_i y_i = 0,   K(x, z) = exp(-gamma ||x - z||^2)

by analytically optimizing one pair of dual variables at a time.  The working
pair is chosen with the first-order heuristic: the maximal KKT violator is
paired with the example on the opposite side of the violated threshold that
maximizes |E_i - E_j| (the maximal-violating pair).  Residuals are updated
incrementally during a sweep of pair steps and recomputed from scratch
between sweeps; the solver stops once the violating gap is within twice the
tolerance, which bounds every per-point KKT violation by the tolerance after
the bias is placed mid-gap.

Multiclass problems are handled one-vs-one: the pair (a, b) with a < b trains
class b as +1 and class a as -1, so a positive decision value favors the
higher class index.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import ClassVocabulary, FeatureTable, LabelVector
from .ensemble import ProbabilityMatrix
from .errors import DataError, NumericError, ValidationError

_STEP_EPS = 1e-12  # minimum meaningful pair update
_SNAP = 1e-8  # relative snap-to-bound threshold for alphas


@dataclass(frozen=True)
class SvmConfig:
    c: float = 0.0538
    gamma_mode: str = "automatic"  # "automatic" resolves to 1/D after selection
    gamma: float | None = None
    tolerance: float = 1e-3
    max_passes: int = 10_000

    def __post_init__(self):
        if self.c <= 0:
            raise ValidationError(f"svm c must be positive, got {self.c}")
        if self.gamma_mode not in ("automatic", "explicit"):
            raise ValidationError(f"gamma_mode must be automatic or explicit, got {self.gamma_mode!r}")
        if self.gamma_mode == "explicit" and (self.gamma is None or self.gamma <= 0):
            raise ValidationError("explicit gamma_mode requires a positive gamma")
        if self.tolerance <= 0:
            raise ValidationError("svm tolerance must be positive")
        if self.max_passes < 1:
            raise ValidationError("svm max_passes must be at least 1")

    def resolve_gamma(self, n_features: int) -> float:
        if self.gamma_mode == "explicit":
            return float(self.gamma)
        if n_features < 1:
            raise DataError("cannot resolve automatic gamma for a 0-feature table")
        return 1.0 / n_features


@dataclass(frozen=True)
class BinarySvmModel:
    """One trained machine for an unordered class pair (low, high)."""

    support_vectors: np.ndarray  # (M, D)
    dual_coeffs: np.ndarray  # (M,) alpha_i * y_i
    bias: float
    gamma: float
    class_pair: tuple[int, int]

    def __post_init__(self):
        sv = np.array(self.support_vectors, dtype=float, copy=True)
        coeffs = np.array(self.dual_coeffs, dtype=float, copy=True)
        if sv.ndim != 2 or coeffs.ndim != 1 or sv.shape[0] != coeffs.shape[0]:
            raise ValidationError("support vectors and dual coefficients disagree in shape")
        if sv.size and not np.isfinite(sv).all():
            raise ValidationError("support vectors must be finite")
        if coeffs.size and not np.isfinite(coeffs).all():
            raise ValidationError("dual coefficients must be finite")
        sv.flags.writeable = False
        coeffs.flags.writeable = False
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coeffs", coeffs)
        object.__setattr__(self, "class_pair", tuple(self.class_pair))

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]


@dataclass(frozen=True)
class SvmModel:
    binaries: tuple[BinarySvmModel, ...]
    vocab_size: int
    n_features: int
    config: SvmConfig = field(default_factory=SvmConfig)

    def __post_init__(self):
        object.__setattr__(self, "binaries", tuple(self.binaries))
        expected = self.vocab_size * (self.vocab_size - 1) // 2
        if len(self.binaries) != expected:
            raise ValidationError(
                f"expected {expected} binary machines for {self.vocab_size} classes, "
                f"got {len(self.binaries)}"
            )


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """Gram matrix K[i, j] = exp(-gamma * ||a_i - b_j||^2)."""
    with np.errstate(invalid="ignore", over="ignore"):
        sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
        np.maximum(sq, 0.0, out=sq)
        k = np.exp(-gamma * sq)
    if k.size and not np.isfinite(k).all():
        raise NumericError("kernel evaluation produced a non-finite value")
    return k


class _Smo:
    """Mutable state for one binary subproblem; see module docstring.

    Iterations track the bias-free residuals F_i = sum_j a_j y_j K_ij - y_i.
    A point with y_i = +1 and a_i < C (or y_i = -1 and a_i > 0) lower-bounds
    the feasible bias at -F_i; the mirrored set upper-bounds it.  The maximal
    violating pair is the extreme point of each set, and optimality holds
    when the bias interval is non-empty up to 2*tol.
    """

    def __init__(self, kernel: np.ndarray, y: np.ndarray, c: float, tol: float, max_passes: int):
        self.kernel = kernel
        self.y = y
        self.c = c
        self.tol = tol
        self.max_passes = max_passes
        self.n = y.shape[0]
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.residuals = -y.astype(float)

    def _refresh(self) -> None:
        self.residuals = self.kernel @ (self.alpha * self.y) - self.y

    def _select_pair(self) -> tuple[int, int, float]:
        can_rise = ((self.y > 0) & (self.alpha < self.c)) | ((self.y < 0) & (self.alpha > 0.0))
        can_fall = ((self.y > 0) & (self.alpha > 0.0)) | ((self.y < 0) & (self.alpha < self.c))
        up = np.where(can_rise, self.residuals, np.inf)
        low = np.where(can_fall, self.residuals, -np.inf)
        i = int(np.argmin(up))
        j = int(np.argmax(low))
        return i, j, float(low[j] - up[i])

    def _finalize_bias(self) -> None:
        i, j, _ = self._select_pair()
        self.b = -0.5 * (self.residuals[i] + self.residuals[j])

    def solve(self) -> bool:
        for _ in range(self.max_passes):
            self._refresh()  # drop incremental drift before checking optimality
            i, j, gap = self._select_pair()
            if gap <= 2.0 * self.tol:
                self._finalize_bias()
                return True
            for _ in range(self.n):
                if not self._take_step(i, j):
                    break
                i, j, gap = self._select_pair()
                if gap <= 2.0 * self.tol:
                    break
        self._refresh()
        self._finalize_bias()
        i, j, gap = self._select_pair()
        return gap <= 2.0 * self.tol

    def _take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = self.y[i1], self.y[i2]
        f1, f2 = self.residuals[i1], self.residuals[i2]
        s = y1 * y2
        if s < 0:
            lo = max(0.0, a2 - a1)
            hi = min(self.c, self.c + a2 - a1)
        else:
            lo = max(0.0, a1 + a2 - self.c)
            hi = min(self.c, a1 + a2)
        if lo >= hi:
            return False
        k11 = self.kernel[i1, i1]
        k12 = self.kernel[i1, i2]
        k22 = self.kernel[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0.0:
            a2_new = a2 + y2 * (f1 - f2) / eta
            a2_new = min(max(a2_new, lo), hi)
        else:
            # Degenerate curvature (duplicate points): compare the dual
            # objective at the two segment ends directly.
            v1 = (f1 + y1) - a1 * y1 * k11 - a2 * y2 * k12
            v2 = (f2 + y2) - a1 * y1 * k12 - a2 * y2 * k22

            def w_pair(b1: float, b2: float) -> float:
                return (
                    b1 + b2
                    - 0.5 * k11 * b1 * b1
                    - 0.5 * k22 * b2 * b2
                    - s * k12 * b1 * b2
                    - y1 * v1 * b1
                    - y2 * v2 * b2
                )

            w_lo = w_pair(a1 + s * (a2 - lo), lo)
            w_hi = w_pair(a1 + s * (a2 - hi), hi)
            if w_lo > w_hi + _STEP_EPS:
                a2_new = lo
            elif w_hi > w_lo + _STEP_EPS:
                a2_new = hi
            else:
                return False
        if a2_new < _SNAP * self.c:
            a2_new = 0.0
        elif a2_new > (1.0 - _SNAP) * self.c:
            a2_new = self.c
        if a2_new == a2:
            return False
        a1_new = a1 + s * (a2 - a2_new)
        # Snap bound dust so box membership tests stay exact; the equality
        # constraint drifts by at most the snap width per occurrence.
        if a1_new < _SNAP * self.c:
            a1_new = 0.0
        elif a1_new > (1.0 - _SNAP) * self.c:
            a1_new = self.c
        da1 = a1_new - a1
        da2 = a2_new - a2
        self.residuals += y1 * da1 * self.kernel[i1] + y2 * da2 * self.kernel[i2]
        self.alpha[i1] = a1_new
        self.alpha[i2] = a2_new
        return True


def solve_binary(
    kernel: np.ndarray, y: np.ndarray, cfg: SvmConfig
) -> tuple[np.ndarray, float, bool]:
    """Run SMO on a precomputed Gram matrix; returns (alpha, bias, converged)."""
    state = _Smo(kernel, y, cfg.c, cfg.tolerance, cfg.max_passes)
    converged = state.solve()
    return state.alpha, state.b, converged


def svm_train(
    x: FeatureTable, y: LabelVector, cfg: SvmConfig, n_classes: int | None = None
) -> SvmModel:
    """Train one-vs-one binary machines for every class pair.

    Inputs are expected to be aligned and (for meaningful RBF distances)
    standardized.  Every class of the vocabulary must have at least one
    training sample.
    """
    if x.segment_ids != y.segment_ids:
        raise DataError("features and labels must be aligned before SVM training")
    labels = y.labels
    if labels.size == 0:
        raise DataError("cannot train an SVM on an empty table")
    k = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    if k < 2:
        raise DataError("SVM training needs at least 2 classes")
    counts = np.bincount(labels, minlength=k)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise DataError(f"classes {missing.tolist()} have no training samples")
    gamma = cfg.resolve_gamma(x.n_features)
    binaries = []
    for c1 in range(k):
        for c2 in range(c1 + 1, k):
            rows = np.flatnonzero((labels == c1) | (labels == c2))
            sub = x.values[rows]
            yy = np.where(labels[rows] == c2, 1.0, -1.0)
            kernel = rbf_kernel(sub, sub, gamma)
            alpha, bias, converged = solve_binary(kernel, yy, cfg)
            if not converged:
                warnings.warn(
                    f"SMO hit max_passes={cfg.max_passes} on class pair ({c1}, {c2}); "
                    "KKT conditions may not hold to tolerance",
                    stacklevel=2,
                )
            keep = alpha > 0.0
            binaries.append(
                BinarySvmModel(
                    support_vectors=sub[keep],
                    dual_coeffs=(alpha * yy)[keep],
                    bias=bias,
                    gamma=gamma,
                    class_pair=(c1, c2),
                )
            )
    return SvmModel(tuple(binaries), k, x.n_features, cfg)


def binary_decisions(model: BinarySvmModel, x: np.ndarray) -> np.ndarray:
    """Decision values sum_i coeff_i K(sv_i, x) + bias for each row of x."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise DataError(
            f"expected {model.n_features}-dimensional inputs, got shape {x.shape}"
        )
    if model.support_vectors.shape[0] == 0:
        return np.full(x.shape[0], model.bias)
    k = rbf_kernel(x, model.support_vectors, model.gamma)
    return k @ model.dual_coeffs + model.bias


def svm_decision(model: BinarySvmModel, x: np.ndarray) -> float:
    """Decision value for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DataError("svm_decision expects a single 1-D feature vector")
    return float(binary_decisions(model, x[None, :])[0])


def _votes_and_margins(model: SvmModel, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = values.shape[0]
    votes = np.zeros((n, model.vocab_size))
    margins = np.zeros((n, model.vocab_size))
    for binary in model.binaries:
        d = binary_decisions(binary, values)
        c1, c2 = binary.class_pair
        votes[:, c2] += d > 0.0
        votes[:, c1] += d < 0.0
        margins[:, c2] += d
        margins[:, c1] -= d
    return votes, margins


def _pick_class(votes_row: np.ndarray, margins_row: np.ndarray) -> int:
    best = np.flatnonzero(votes_row == votes_row.max())
    if best.size > 1:
        m = margins_row[best]
        best = best[np.flatnonzero(m == m.max())]
    return int(best[0])


def svm_predict(model: SvmModel, t: FeatureTable) -> LabelVector:
    """One-vs-one vote; ties broken by summed decision margins, then index."""
    if t.n_features != model.n_features:
        raise DataError(
            f"model expects {model.n_features} features, table has {t.n_features}"
        )
    votes, margins = _votes_and_margins(model, t.values)
    out = np.array(
        [_pick_class(votes[i], margins[i]) for i in range(t.n_segments)],
        dtype=np.int64,
    )
    return LabelVector(t.segment_ids, out)


def svm_scores(model: SvmModel, t: FeatureTable, vocab: ClassVocabulary) -> ProbabilityMatrix:
    """Pseudo-probabilities (votes + softmax of summed margins, normalized).

    The row argmax always matches svm_predict: vote gaps are integral while
    the softmax term contributes less than 1, and ties fall through to the
    same margin ordering.
    """
    if vocab.size != model.vocab_size:
        raise DataError(
            f"model trained for {model.vocab_size} classes, vocabulary has {vocab.size}"
        )
    if t.n_features != model.n_features:
        raise DataError(
            f"model expects {model.n_features} features, table has {t.n_features}"
        )
    votes, margins = _votes_and_margins(model, t.values)
    shifted = margins - margins.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    soft = expd / expd.sum(axis=1, keepdims=True)
    raw = votes + soft
    probs = raw / raw.sum(axis=1, keepdims=True)
    return ProbabilityMatrix(t.segment_ids, vocab, probs)
