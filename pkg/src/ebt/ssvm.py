"""Online structured SVM with intersection kernel and a support-vector budget.

The model keeps a set of support vectors grouped into per-frame patterns. Each
pattern contributes one positive (the chosen box) and negatives drawn from the
hard-negative candidates; dual weights within a pattern sum to zero. The
structured loss between boxes is 1 - IoU. When the budget is exceeded, the
negative support vector whose removal least perturbs the weight-vector norm is
folded into its pattern's positive.
"""
from __future__ import annotations

import numpy as np

from .features import (
    COLOR_LEVELS,
    GRAY_LEVELS,
    feature_dim,
    intersection_kernel_matrix,
    pyramid_feature,
)
from .geometry import Box, iou

DEFAULT_BUDGET = 100
DEFAULT_C = 100.0
REPROCESS_PASSES = 10
WEIGHT_EPS = 1e-12


class SsvmModel:
    """Budgeted LaRank-style structured SVM over pyramid histogram features."""

    def __init__(
        self,
        budget: int = DEFAULT_BUDGET,
        C: float = DEFAULT_C,
        levels: int = COLOR_LEVELS,
        color: bool = True,
    ):
        self.budget = budget
        self.C = C
        self.levels = levels
        self.color = color
        self.dim = feature_dim(levels, 3 if color else 1)
        self.feats = np.zeros((0, self.dim))
        self.weights = np.zeros(0)
        self.pattern = np.zeros(0, dtype=np.int64)
        self.losses = np.zeros(0)  # structured loss vs the pattern positive
        self.is_positive = np.zeros(0, dtype=bool)
        self.grad = np.zeros(0)  # g_i = -loss_i - f(x_i)
        self.gram = np.zeros((0, 0))
        self._next_pattern = 0
        self._rr = 0  # round-robin cursor for reprocess passes

    # -- scoring -----------------------------------------------------------

    def extract(self, frame: np.ndarray, b: Box) -> np.ndarray:
        return pyramid_feature(frame, b, levels=self.levels, color=self.color)

    def score_features(self, feats: np.ndarray) -> np.ndarray:
        if len(self.weights) == 0 or len(feats) == 0:
            return np.zeros(len(feats))
        k = intersection_kernel_matrix(
            np.ascontiguousarray(feats), np.ascontiguousarray(self.feats)
        )
        return k @ self.weights

    def score(self, feat: np.ndarray) -> float:
        return float(self.score_features(feat[None, :])[0])

    @property
    def n_support(self) -> int:
        return len(self.weights)

    # -- bookkeeping ---------------------------------------------------------

    def _add_sv(self, feat: np.ndarray, pattern: int, loss: float, positive: bool) -> int:
        row = (
            intersection_kernel_matrix(feat[None, :], np.ascontiguousarray(self.feats))[0]
            if len(self.feats)
            else np.zeros(0)
        )
        self_k = float(np.minimum(feat, feat).sum())
        n = len(self.weights)
        gram = np.empty((n + 1, n + 1))
        gram[:n, :n] = self.gram
        gram[n, :n] = row
        gram[:n, n] = row
        gram[n, n] = self_k
        self.gram = gram
        self.feats = np.vstack([self.feats, feat[None, :]])
        self.weights = np.append(self.weights, 0.0)
        self.pattern = np.append(self.pattern, pattern)
        self.losses = np.append(self.losses, loss)
        self.is_positive = np.append(self.is_positive, positive)
        f = float(row @ self.weights[:n]) if n else 0.0
        self.grad = np.append(self.grad, -loss - f)
        return n

    def _remove_sv(self, idx: int) -> None:
        keep = np.arange(len(self.weights)) != idx
        self.feats = self.feats[keep]
        self.weights = self.weights[keep]
        self.pattern = self.pattern[keep]
        self.losses = self.losses[keep]
        self.is_positive = self.is_positive[keep]
        self.grad = self.grad[keep]
        self.gram = self.gram[np.ix_(keep, keep)]

    def _smo_step(self, ip: int, im: int) -> None:
        if ip == im:
            return
        denom = self.gram[ip, ip] + self.gram[im, im] - 2.0 * self.gram[ip, im]
        if denom <= 1e-12:
            return
        upper = (self.C if self.is_positive[ip] else 0.0) - self.weights[ip]
        lam = min(max((self.grad[ip] - self.grad[im]) / denom, 0.0), upper)
        if lam <= 0.0:
            return
        self.weights[ip] += lam
        self.weights[im] -= lam
        self.grad -= lam * (self.gram[:, ip] - self.gram[:, im])

    def _reprocess(self) -> None:
        patterns = np.unique(self.pattern)
        if len(patterns) == 0:
            return
        pid = patterns[self._rr % len(patterns)]
        self._rr += 1
        idx = np.nonzero(self.pattern == pid)[0]
        feasible_up = [
            i
            for i in idx
            if self.weights[i] < ((self.C if self.is_positive[i] else 0.0) - WEIGHT_EPS)
        ]
        if not feasible_up:
            return
        ip = max(feasible_up, key=lambda i: self.grad[i])
        im = min(idx, key=lambda i: self.grad[i])
        self._smo_step(ip, im)

    def _prune(self) -> None:
        # negatives driven back to zero weight carry no information
        while True:
            drop = None
            for i in range(len(self.weights)):
                if not self.is_positive[i] and abs(self.weights[i]) <= WEIGHT_EPS:
                    drop = i
                    break
                if (
                    self.is_positive[i]
                    and abs(self.weights[i]) <= WEIGHT_EPS
                    and np.sum(self.pattern == self.pattern[i]) == 1
                ):
                    drop = i
                    break
            if drop is None:
                return
            self._remove_sv(drop)

    def _enforce_budget(self) -> None:
        # only negatives are removal candidates: the pattern positive absorbs
        # the removed weight, keeping per-pattern sums at zero
        while len(self.weights) > self.budget:
            best = None
            best_cost = None
            for i in range(len(self.weights)):
                if self.is_positive[i]:
                    continue
                pos = np.nonzero((self.pattern == self.pattern[i]) & self.is_positive)[0]
                if len(pos) == 0:
                    continue
                p = int(pos[0])
                cost = self.weights[i] ** 2 * (
                    self.gram[i, i] + self.gram[p, p] - 2.0 * self.gram[i, p]
                )
                if best_cost is None or cost < best_cost:
                    best, best_cost, best_pos = i, cost, p
            if best is None:
                return
            beta = self.weights[best]
            self.weights[best_pos] += beta
            self.grad -= beta * (self.gram[:, best_pos] - self.gram[:, best])
            self._remove_sv(best)
            self._prune()

    # -- learning ------------------------------------------------------------

    def update(self, frame: np.ndarray, positive: Box, negatives: list[Box]) -> "SsvmModel":
        """One update round: ProcessNew on the most violating negative, then
        reprocess passes over existing patterns, then budget maintenance."""
        if not negatives:
            return self
        pos_feat = self.extract(frame, positive)
        neg_feats = np.stack([self.extract(frame, b) for b in negatives])
        losses = np.array([1.0 - iou(b, positive) for b in negatives])
        f_negs = self.score_features(neg_feats)
        worst = int(np.argmax(losses + f_negs))

        pid = self._next_pattern
        self._next_pattern += 1
        ip = self._add_sv(pos_feat, pid, 0.0, True)
        im = self._add_sv(neg_feats[worst], pid, float(losses[worst]), False)
        self._smo_step(ip, im)
        for _ in range(REPROCESS_PASSES):
            self._reprocess()
        self._prune()
        self._enforce_budget()
        return self

    def pattern_weight_sums(self) -> dict[int, float]:
        return {
            int(p): float(self.weights[self.pattern == p].sum()) for p in np.unique(self.pattern)
        }

    # -- serialization ---------------------------------------------------------

    def save(self, path: str) -> None:
        """Debug snapshot: header with counts, then one CSV row per SV."""
        with open(path, "w") as fh:
            fh.write(f"{len(self.weights)} {self.dim} {self.budget} {self.C}\n")
            for i in range(len(self.weights)):
                head = [
                    repr(float(self.weights[i])),
                    str(int(self.pattern[i])),
                    str(int(self.is_positive[i])),
                    repr(float(self.losses[i])),
                ]
                fh.write(",".join(head + [repr(float(v)) for v in self.feats[i]]) + "\n")

    @classmethod
    def load(cls, path: str, levels: int = COLOR_LEVELS, color: bool = True) -> "SsvmModel":
        with open(path) as fh:
            n, dim, budget, c = fh.readline().split()
            model = cls(budget=int(budget), C=float(c), levels=levels, color=color)
            if model.dim != int(dim):
                raise ValueError("snapshot dimension does not match feature config")
            for _ in range(int(n)):
                parts = fh.readline().rstrip("\n").split(",")
                w, pid, pos, loss = float(parts[0]), int(parts[1]), bool(int(parts[2])), float(parts[3])
                feat = np.array([float(v) for v in parts[4:]])
                i = model._add_sv(feat, pid, loss, pos)
                model.weights[i] = 0.0
                # re-apply the stored weight and refresh gradients
                model.weights[i] = w
            model._next_pattern = int(model.pattern.max()) + 1 if len(model.pattern) else 0
            # gradients were built assuming zero weights; recompute
            f = model.gram @ model.weights if len(model.weights) else np.zeros(0)
            model.grad = -model.losses - f
            return model


def grayscale_model(budget: int = DEFAULT_BUDGET, C: float = DEFAULT_C) -> SsvmModel:
    """The 480-D ablation configuration (4-level grayscale pyramid)."""
    return SsvmModel(budget=budget, C=C, levels=GRAY_LEVELS, color=False)
