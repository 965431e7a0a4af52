"""Full tracking loop: proposals, candidate classification, model updates.

The tracker scores edge-box proposals over the whole frame (plus the previous
estimate) with the core appearance model and a motion-smoothness bonus, picks
the argmax, and feeds hard negatives from the proposal set and local samples
back into the model.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import rerank as rr
from .edgebox import EdgeStructures, Proposal, ProposalConfig, generate_pool
from .features import NccTemplate, ncc_score
from .geometry import Box, LocalSampleConfig, clip_to_frame, iou, sample_local
from .imaging import downscale_frame, edges_from_frame, to_grayscale
from .ssvm import SsvmModel

TEST_SETS = ("E", "R", "E+R")
UPDATE_SETS = ("E", "R", "E+R")
CORES = ("ssvm", "ncc")
NEGATIVE_IOU = 0.5


def smoothness(b: Box, prev: Box, w_s: float, sigma: float) -> float:
    """Motion-smoothness bonus: w_s * exp(-||c(b) - c(prev)||^2 / (2 sigma^2))."""
    bx, by = b.center()
    px, py = prev.center()
    d2 = (bx - px) ** 2 + (by - py) ** 2
    return w_s * math.exp(-d2 / (2.0 * sigma * sigma))


@dataclass
class StepInfo:
    """Per-frame diagnostics logged by the tracker."""

    frame_index: int
    pool_size: int
    n_proposals: int
    n_candidates: int
    score: float
    core_score: float
    smoothness: float
    fallback: bool
    timings_ms: dict = field(default_factory=dict)


class EdgeBoxTracker(BaseEstimator):
    """Model-free tracker over instance-specific edge-box proposals.

    sklearn-style interface: ``fit(frame, box)`` initializes on the first
    frame's ground truth, ``predict(frame)`` advances one frame and returns the
    estimated box. All parameters are plain constructor arguments so
    ``get_params`` / ``set_params`` compose with the wider ecosystem.
    """

    def __init__(
        self,
        core: str = "ssvm",
        H: int = 200,
        w_s: float = 0.1,
        test_set: str = "E",
        update_set: str = "E+R",
        rerank: bool = True,
        feature: int = 2640,
        seed: int = 0,
        alpha: float = 0.85,
        beta: float = 0.8,
        e_threshold: float = 0.005,
        area_min_ratio: float = 0.5,
        area_max_ratio: float = 2.0,
        radius: float = 30.0,
        local_count: int = 80,
        exhaustive_stride: int = 2,
        max_side: int = 640,
        edge_threshold: float = 0.1,
        budget: int = 100,
        C: float = 100.0,
    ):
        self.core = core
        self.H = H
        self.w_s = w_s
        self.test_set = test_set
        self.update_set = update_set
        self.rerank = rerank
        self.feature = feature
        self.seed = seed
        self.alpha = alpha
        self.beta = beta
        self.e_threshold = e_threshold
        self.area_min_ratio = area_min_ratio
        self.area_max_ratio = area_max_ratio
        self.radius = radius
        self.local_count = local_count
        self.exhaustive_stride = exhaustive_stride
        self.max_side = max_side
        self.edge_threshold = edge_threshold
        self.budget = budget
        self.C = C

    # -- configuration helpers ------------------------------------------------

    def _check_params(self) -> None:
        if self.core not in CORES:
            raise ValueError(f"core must be one of {CORES}")
        if self.test_set not in TEST_SETS or self.update_set not in UPDATE_SETS:
            raise ValueError(f"test/update sets must be one of {TEST_SETS}")
        if self.feature not in (2640, 480):
            raise ValueError("feature must be 2640 or 480")

    def _proposal_config(self) -> ProposalConfig:
        return ProposalConfig(
            alpha=self.alpha,
            beta=self.beta,
            e_threshold=self.e_threshold,
            max_proposals=self.H,
            area_min_ratio=self.area_min_ratio,
            area_max_ratio=self.area_max_ratio,
        )

    def _local_config(self) -> LocalSampleConfig:
        return LocalSampleConfig(radius=self.radius, count=self.local_count)

    # -- pipeline stages --------------------------------------------------------

    def _build_structures(self, frame: np.ndarray) -> tuple[EdgeStructures, float]:
        scaled, scale = downscale_frame(frame, self.max_side)
        edges = edges_from_frame(scaled, self.edge_threshold)
        return EdgeStructures.from_edge_map(edges), scale

    def _proposals(
        self, structures: EdgeStructures, scale: float, prev: Box
    ) -> tuple[list[Proposal], list[Proposal]]:
        """Returns (raw pool, top-H re-ranked proposals), both in frame coords."""
        pool = generate_pool(structures, prev.scaled(scale), self._proposal_config())
        if self.rerank:
            top = rr.select_top(self.rerank_model_, pool, self.H, structures)
        else:
            top = pool[: self.H]
        if scale != 1.0:
            inv = 1.0 / scale
            top = [Proposal(p.box.scaled(inv), p.objectness, p.rerank_score) for p in top]
        return pool, top

    def _local_test_boxes(self, prev: Box) -> list[Box]:
        """Dense grid of prev-size boxes within the search radius (test_set R)."""
        fw, fh = self.frame_size_
        boxes = []
        stride = max(1, int(self.exhaustive_stride))
        r = int(self.radius)
        px, py = prev.x, prev.y
        for dy in range(-r, r + 1, stride):
            for dx in range(-r, r + 1, stride):
                if dx * dx + dy * dy > self.radius * self.radius:
                    continue
                c = clip_to_frame(Box(px + dx, py + dy, prev.w, prev.h), fw, fh)
                if c is not None:
                    boxes.append(c)
        return boxes

    def _core_scores(self, frame: np.ndarray, boxes: list[Box]) -> np.ndarray:
        if self.core == "ssvm":
            feats = np.stack([self.model_.extract(frame, b) for b in boxes])
            self._last_feats = feats
            return self.model_.score_features(feats)
        gray = to_grayscale(frame)
        self._last_feats = None
        return np.array([ncc_score(frame, b, self.template_, gray=gray) for b in boxes])

    def _update_negatives(self, chosen: Box, proposals: list[Proposal]) -> list[Box]:
        fw, fh = self.frame_size_
        negatives: list[Box] = []
        if self.update_set in ("E", "E+R"):
            negatives.extend(
                p.box for p in proposals if iou(p.box, chosen) < NEGATIVE_IOU
            )
        if self.update_set in ("R", "E+R"):
            for b in sample_local(chosen, self._local_config(), self.rng_):
                c = clip_to_frame(b, fw, fh)
                if c is not None and iou(c, chosen) < NEGATIVE_IOU:
                    negatives.append(c)
        return negatives

    # -- estimator API ---------------------------------------------------------

    def fit(self, frame: np.ndarray, box: Box | tuple) -> "EdgeBoxTracker":
        """Initialize on the first frame from a ground-truth box."""
        self._check_params()
        if not isinstance(box, Box):
            box = Box(*box)
        fh_, fw_ = frame.shape[:2]
        self.frame_size_ = (fw_, fh_)
        gt = clip_to_frame(box, fw_, fh_)
        if gt is None:
            raise ValueError("initial box degenerate after clipping to the frame")
        self.sigma_ = gt.diagonal
        self.rng_ = np.random.default_rng(self.seed)
        self.t_ = 1
        self.estimate_ = gt
        self.trajectory_ = [gt]
        self.rerank_model_ = rr.RerankModel()

        structures, scale = self._build_structures(frame)
        pool = generate_pool(structures, gt.scaled(scale), self._proposal_config())
        if self.rerank:
            rr.update(self.rerank_model_, gt.scaled(scale), pool[: self.H], self.t_, structures)

        if self.core == "ssvm":
            self.model_ = SsvmModel(
                budget=self.budget,
                C=self.C,
                levels=5 if self.feature == 2640 else 4,
                color=self.feature == 2640,
            )
            inv = 1.0 / scale
            negatives = []
            for p in pool[: self.H]:
                b = clip_to_frame(p.box.scaled(inv), fw_, fh_)
                if b is not None and iou(b, gt) < NEGATIVE_IOU:
                    negatives.append(b)
            for b in sample_local(gt, self._local_config(), self.rng_):
                c = clip_to_frame(b, fw_, fh_)
                if c is not None and iou(c, gt) < NEGATIVE_IOU:
                    negatives.append(c)
            if negatives:
                self.model_.update(frame, gt, negatives)
        else:
            self.template_ = NccTemplate.from_frame(frame, gt)
        self.last_info_ = StepInfo(
            frame_index=1,
            pool_size=len(pool),
            n_proposals=min(len(pool), self.H),
            n_candidates=0,
            score=0.0,
            core_score=0.0,
            smoothness=self.w_s,
            fallback=False,
        )
        return self

    def predict(self, frame: np.ndarray) -> Box:
        """Advance one frame; returns (and records) the new estimate."""
        if not hasattr(self, "estimate_"):
            raise RuntimeError("tracker is not fitted; call fit(frame, box) first")
        fh_, fw_ = frame.shape[:2]
        if (fw_, fh_) != self.frame_size_:
            raise ValueError("frame size changed mid-sequence")
        self.t_ += 1
        prev = self.estimate_
        timings: dict[str, float] = {}

        t0 = time.perf_counter()
        structures, scale = self._build_structures(frame)
        timings["edges"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        pool = generate_pool(structures, prev.scaled(scale), self._proposal_config())
        timings["pool"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        if self.rerank:
            top = rr.select_top(self.rerank_model_, pool, self.H, structures)
        else:
            top = pool[: self.H]
        timings["rerank"] = time.perf_counter() - t0

        inv = 1.0 / scale
        proposals: list[Box] = []
        for p in top:
            b = clip_to_frame(p.box.scaled(inv), fw_, fh_)
            if b is not None:
                proposals.append(b)

        fallback = False
        candidates: list[Box] = []
        if self.test_set in ("E", "E+R"):
            candidates.extend(proposals)
        if self.test_set == "R":
            candidates.extend(self._local_test_boxes(prev))
        elif self.test_set == "E+R":
            for b in sample_local(prev, self._local_config(), self.rng_):
                c = clip_to_frame(b, fw_, fh_)
                if c is not None:
                    candidates.append(c)
        if self.test_set in ("E", "E+R") and not proposals and self.test_set == "E":
            # empty pool: the tracker never halts, fall back to local samples
            fallback = True
            for b in sample_local(prev, self._local_config(), self.rng_):
                c = clip_to_frame(b, fw_, fh_)
                if c is not None:
                    candidates.append(c)
        candidates.append(prev)

        t0 = time.perf_counter()
        core = self._core_scores(frame, candidates)
        smooth = np.array([smoothness(b, prev, self.w_s, self.sigma_) for b in candidates])
        total = core + smooth
        timings["score"] = time.perf_counter() - t0

        best = 0
        for i in range(1, len(candidates)):
            if total[i] > total[best]:
                best = i
            elif total[i] == total[best]:
                if smooth[i] > smooth[best]:
                    best = i
                elif smooth[i] == smooth[best]:
                    bb, cb = candidates[best], candidates[i]
                    if (cb.y, cb.x) < (bb.y, bb.x):
                        best = i
        chosen = candidates[best]

        t0 = time.perf_counter()
        if self.rerank:
            rr.update(self.rerank_model_, chosen.scaled(scale), pool, self.t_, structures)
        if self.core == "ssvm":
            negatives = self._update_negatives(chosen, [Proposal(b, 0.0) for b in proposals])
            if negatives:
                self.model_.update(frame, chosen, negatives)
        timings["update"] = time.perf_counter() - t0

        self.estimate_ = chosen
        self.trajectory_.append(chosen)
        self.last_info_ = StepInfo(
            frame_index=self.t_,
            pool_size=len(pool),
            n_proposals=len(proposals),
            n_candidates=len(candidates),
            score=float(total[best]),
            core_score=float(core[best]),
            smoothness=float(smooth[best]),
            fallback=fallback,
            timings_ms={k: v * 1000.0 for k, v in timings.items()},
        )
        return chosen

    def step(self, frame: np.ndarray) -> tuple[Box, float]:
        box = self.predict(frame)
        return box, self.last_info_.score


def run(frames, gt_first: Box | tuple, **params) -> list[Box]:
    """Track a whole sequence; frame 1's output is the given ground truth."""
    tracker = EdgeBoxTracker(**params)
    out: list[Box] = []
    for i, frame in enumerate(frames):
        if i == 0:
            tracker.fit(frame, gt_first)
            out.append(tracker.estimate_)
        else:
            out.append(tracker.predict(frame))
    return out
