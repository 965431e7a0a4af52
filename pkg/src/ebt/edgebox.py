"""Edge grouping, contour affinities and enclosed-contour objectness scoring.

Candidate boxes are scored by the weighted, perimeter-normalized magnitude of
edge groups wholly enclosed by the box, discounting groups that continue (via
chained affinities) into groups straddling the box boundary, and discarding
groups that touch the centered half-size interior box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .geometry import Box
from .imaging import EdgeMap

AFFINITY_GAMMA = 2.0
AFFINITY_MIN = 0.05
ADJACENCY_RADIUS = 2  # Chebyshev distance in pixels for group adjacency
PERIMETER_KAPPA = 1.5
MAX_GROUP_TURN = math.pi / 2.0
# Continuation products below this are dropped from the reachability table;
# the induced score error is far below every stated tolerance.
PATH_PRUNE = 1e-12


@dataclass
class EdgeGroup:
    """A connected chain of edge pixels with bounded cumulative turn."""

    xs: np.ndarray
    ys: np.ndarray
    magnitudes: np.ndarray
    orientations: np.ndarray
    mean_pos: tuple[float, float] = field(init=False)
    mean_orientation: float = field(init=False)
    total_magnitude: float = field(init=False)

    def __post_init__(self) -> None:
        self.mean_pos = (float(self.xs.mean()), float(self.ys.mean()))
        # circular mean modulo pi via angle doubling
        c = np.cos(2.0 * self.orientations).sum()
        s = np.sin(2.0 * self.orientations).sum()
        self.mean_orientation = float(np.mod(math.atan2(s, c) / 2.0, math.pi))
        self.total_magnitude = float(self.magnitudes.sum())

    def __len__(self) -> int:
        return len(self.xs)


@dataclass(frozen=True)
class ProposalConfig:
    alpha: float = 0.85  # sliding-window IoU step
    beta: float = 0.8  # NMS overlap
    e_threshold: float = 0.005
    max_proposals: int = 200
    area_min_ratio: float = 0.5
    area_max_ratio: float = 2.0


@dataclass
class Proposal:
    box: Box
    objectness: float
    rerank_score: float | None = None


def _orientation_diff(a: float, b: float) -> float:
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def group_edges(e: EdgeMap) -> list[EdgeGroup]:
    """Partition an edge map into 8-connected groups of bounded cumulative turn.

    Greedy breadth-first traversal from raster-order seeds; a neighbor joins the
    group only while the orientation change accumulated along its path stays
    within pi/2. Singleton groups are allowed.
    """
    n = len(e)
    if n == 0:
        return []
    order = np.lexsort((e.xs, e.ys))
    index = {}
    for i in range(n):
        index[(int(e.ys[i]), int(e.xs[i]))] = i
    assigned = np.full(n, -1, dtype=np.int64)
    groups: list[list[int]] = []

    for seed in order:
        seed = int(seed)
        if assigned[seed] >= 0:
            continue
        gid = len(groups)
        members = [seed]
        assigned[seed] = gid
        turn = {seed: 0.0}
        queue = [seed]
        qi = 0
        while qi < len(queue):
            cur = queue[qi]
            qi += 1
            cy, cx = int(e.ys[cur]), int(e.xs[cur])
            for dy, dx in _NEIGHBORS:
                nb = index.get((cy + dy, cx + dx))
                if nb is None or assigned[nb] >= 0:
                    continue
                step = _orientation_diff(float(e.orientation[cur]), float(e.orientation[nb]))
                acc = turn[cur] + step
                if acc > MAX_GROUP_TURN:
                    continue
                assigned[nb] = gid
                turn[nb] = acc
                members.append(nb)
                queue.append(nb)
        groups.append(members)

    out = []
    for members in groups:
        idx = np.array(sorted(members), dtype=np.int64)
        out.append(
            EdgeGroup(
                xs=e.xs[idx].copy(),
                ys=e.ys[idx].copy(),
                magnitudes=e.magnitude[idx].copy(),
                orientations=e.orientation[idx].copy(),
            )
        )
    return out


class AffinityGraph:
    """Sparse symmetric affinities between adjacent edge groups."""

    def __init__(self, n_groups: int):
        self.n_groups = n_groups
        self._a: dict[tuple[int, int], float] = {}

    def set(self, i: int, j: int, value: float) -> None:
        if i == j:
            return
        self._a[(min(i, j), max(i, j))] = value

    def get(self, i: int, j: int) -> float:
        return self._a.get((min(i, j), max(i, j)), 0.0)

    def items(self):
        return self._a.items()

    def __len__(self) -> int:
        return len(self._a)


def compute_affinities(groups: list[EdgeGroup]) -> AffinityGraph:
    """Orientation-agreement affinity for groups with pixels within 2 px.

    affinity(i, j) = |cos(t_i - t_ij) * cos(t_j - t_ij)|^2 where t_ij is the
    angle of the line joining the group mean positions. Values below 0.05 are
    dropped.
    """
    graph = AffinityGraph(len(groups))
    if len(groups) < 2:
        return graph
    owner = {}
    for gi, g in enumerate(groups):
        for k in range(len(g)):
            owner[(int(g.ys[k]), int(g.xs[k]))] = gi
    pairs = set()
    r = ADJACENCY_RADIUS
    for gi, g in enumerate(groups):
        for k in range(len(g)):
            y, x = int(g.ys[k]), int(g.xs[k])
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    gj = owner.get((y + dy, x + dx))
                    if gj is not None and gj != gi:
                        pairs.add((min(gi, gj), max(gi, gj)))
    for gi, gj in pairs:
        a, b = groups[gi], groups[gj]
        dx = b.mean_pos[0] - a.mean_pos[0]
        dy = b.mean_pos[1] - a.mean_pos[1]
        if dx == 0.0 and dy == 0.0:
            continue
        theta_ij = math.atan2(dy, dx)
        val = abs(
            math.cos(a.mean_orientation - theta_ij) * math.cos(b.mean_orientation - theta_ij)
        ) ** AFFINITY_GAMMA
        val = min(max(val, 0.0), 1.0)
        if val >= AFFINITY_MIN:
            graph.set(gi, gj, val)
    return graph


class EdgeStructures:
    """Flattened group/affinity arrays ready for batch window scoring."""

    def __init__(
        self,
        groups: list[EdgeGroup],
        affinities: AffinityGraph,
        frame_size: tuple[int, int] | None = None,
    ):
        self.groups = groups
        self.affinities = affinities
        self.frame_size = frame_size  # (width, height), required for pooling
        n = len(groups)
        self.bbox_x0 = np.array([g.xs.min() if len(g) else 0 for g in groups], dtype=np.float64)
        self.bbox_x1 = np.array([g.xs.max() if len(g) else 0 for g in groups], dtype=np.float64)
        self.bbox_y0 = np.array([g.ys.min() if len(g) else 0 for g in groups], dtype=np.float64)
        self.bbox_y1 = np.array([g.ys.max() if len(g) else 0 for g in groups], dtype=np.float64)
        self.msum = np.array([g.total_magnitude for g in groups], dtype=np.float64)
        counts = [len(g) for g in groups]
        self.pix_off = np.zeros(n + 1, dtype=np.int64)
        if n:
            self.pix_off[1:] = np.cumsum(counts)
        total = int(self.pix_off[-1])
        self.pix_x = np.empty(total, dtype=np.float64)
        self.pix_y = np.empty(total, dtype=np.float64)
        for i, g in enumerate(groups):
            self.pix_x[self.pix_off[i] : self.pix_off[i + 1]] = g.xs
            self.pix_y[self.pix_off[i] : self.pix_off[i + 1]] = g.ys
        self.reach_off, self.reach_tgt, self.reach_val = _reachability(n, affinities)

    @classmethod
    def from_edge_map(cls, e: EdgeMap) -> "EdgeStructures":
        groups = group_edges(e)
        return cls(groups, compute_affinities(groups), frame_size=(e.width, e.height))

    def __len__(self) -> int:
        return len(self.groups)


def _reachability(n: int, affinities: AffinityGraph):
    """Max-product continuation between all group pairs, as CSR arrays.

    Computed as shortest paths over -log(affinity); pairs whose best product
    falls below PATH_PRUNE are omitted. Every group reaches itself with 1.
    """
    if n == 0:
        return np.zeros(1, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0)
    rows, cols, vals = [], [], []
    for (i, j), a in affinities.items():
        rows.append(i)
        cols.append(j)
        vals.append(-math.log(a) if a < 1.0 else 0.0)
    limit = -math.log(PATH_PRUNE)
    if rows:
        graphm = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        dist = dijkstra(graphm, directed=False, limit=limit)
    else:
        dist = np.full((n, n), np.inf)
        np.fill_diagonal(dist, 0.0)
    tgt_lists, val_lists, offsets = [], [], [0]
    for i in range(n):
        finite = np.nonzero(np.isfinite(dist[i]))[0]
        tgt_lists.append(finite)
        val_lists.append(np.exp(-dist[i, finite]))
        offsets.append(offsets[-1] + len(finite))
    return (
        np.array(offsets, dtype=np.int64),
        np.concatenate(tgt_lists).astype(np.int64) if n else np.empty(0, dtype=np.int64),
        np.concatenate(val_lists) if n else np.empty(0),
    )


@njit(cache=True)
def _score_windows_kernel(
    wins, bx0, by0, bx1, by1, msum, px, py, poff, roff, rtgt, rval, kappa
):  # pragma: no cover - exercised via wrappers
    nb = wins.shape[0]
    ng = bx0.shape[0]
    out = np.zeros(nb)
    status = np.empty(ng, dtype=np.int8)  # 0 outside, 1 straddling, 2 inside
    for b in range(nb):
        x = wins[b, 0]
        y = wins[b, 1]
        w = wins[b, 2]
        h = wins[b, 3]
        x1 = x + w
        y1 = y + h
        any_straddle = False
        any_inside = False
        for g in range(ng):
            if bx1[g] < x or bx0[g] >= x1 or by1[g] < y or by0[g] >= y1:
                status[g] = 0
            elif bx0[g] >= x and bx1[g] < x1 and by0[g] >= y and by1[g] < y1:
                status[g] = 2
                any_inside = True
            else:
                # the bbox crosses the window border, so at least one pixel is
                # outside; any pixel inside makes the group straddle
                st = 0
                for k in range(poff[g], poff[g + 1]):
                    if x <= px[k] < x1 and y <= py[k] < y1:
                        st = 1
                        break
                status[g] = st
                if st == 1:
                    any_straddle = True
        if not any_inside:
            continue
        sxa = x + 0.25 * w
        sxb = x + 0.75 * w
        sya = y + 0.25 * h
        syb = y + 0.75 * h
        total = 0.0
        for g in range(ng):
            if status[g] != 2:
                continue
            # groups reaching into the centered half-size box are discounted
            touch = False
            if not (bx1[g] < sxa or bx0[g] >= sxb or by1[g] < sya or by0[g] >= syb):
                if bx0[g] >= sxa and bx1[g] < sxb and by0[g] >= sya and by1[g] < syb:
                    touch = True
                else:
                    for k in range(poff[g], poff[g + 1]):
                        if sxa <= px[k] < sxb and sya <= py[k] < syb:
                            touch = True
                            break
            if touch:
                continue
            cont = 0.0
            if any_straddle:
                for k in range(roff[g], roff[g + 1]):
                    s = rtgt[k]
                    if status[s] == 1 and rval[k] > cont:
                        cont = rval[k]
            if cont > 1.0:
                cont = 1.0
            total += (1.0 - cont) * msum[g]
        out[b] = total / (2.0 * (w + h) ** kappa)
    return out


def score_windows(structures: EdgeStructures, windows: np.ndarray) -> np.ndarray:
    """Objectness for an (N, 4) array of [x, y, w, h] windows."""
    windows = np.ascontiguousarray(windows, dtype=np.float64)
    if windows.size == 0 or len(structures) == 0:
        return np.zeros(len(windows))
    return _score_windows_kernel(
        windows,
        structures.bbox_x0,
        structures.bbox_y0,
        structures.bbox_x1,
        structures.bbox_y1,
        structures.msum,
        structures.pix_x,
        structures.pix_y,
        structures.pix_off,
        structures.reach_off,
        structures.reach_tgt,
        structures.reach_val,
        PERIMETER_KAPPA,
    )


def box_objectness(b: Box, structures: EdgeStructures) -> float:
    return float(score_windows(structures, np.array([b.as_tuple()]))[0])


@njit(cache=True)
def _greedy_nms_kernel(boxes, beta, max_keep):  # pragma: no cover
    n = boxes.shape[0]
    keep = np.empty(n, dtype=np.int64)
    nk = 0
    for i in range(n):
        x = boxes[i, 0]
        y = boxes[i, 1]
        w = boxes[i, 2]
        h = boxes[i, 3]
        ok = True
        for j in range(nk):
            kx = boxes[keep[j], 0]
            ky = boxes[keep[j], 1]
            kw = boxes[keep[j], 2]
            kh = boxes[keep[j], 3]
            ix = min(x + w, kx + kw) - max(x, kx)
            if ix <= 0.0:
                continue
            iy = min(y + h, ky + kh) - max(y, ky)
            if iy <= 0.0:
                continue
            inter = ix * iy
            if inter / (w * h + kw * kh - inter) > beta:
                ok = False
                break
        if ok:
            keep[nk] = i
            nk += 1
            if nk >= max_keep:
                break
    return keep[:nk]


def _window_grid(prev: Box, frame_w: float, frame_h: float, cfg: ProposalConfig) -> np.ndarray:
    """Sliding-window positions/scales with consecutive IoU >= alpha.

    Aspect ratio is held at the previous box's; areas span
    [area_min_ratio, area_max_ratio] times the previous area in geometric
    steps whose consecutive concentric IoU equals alpha.
    """
    log_r = -0.5 * math.log(cfg.alpha)  # linear scale ratio per step
    eps = 1e-9
    k_min = math.ceil(0.5 * math.log(cfg.area_min_ratio) / log_r - eps)
    k_max = math.floor(0.5 * math.log(cfg.area_max_ratio) / log_r + eps)
    step_frac = (1.0 - cfg.alpha) / (1.0 + cfg.alpha)
    chunks = []
    for k in range(k_min, k_max + 1):
        s = math.exp(k * log_r)
        w = prev.w * s
        h = prev.h * s
        if w > frame_w or h > frame_h:
            continue
        dx = max(w * step_frac, 1e-6)
        dy = max(h * step_frac, 1e-6)
        xs = np.arange(0.0, frame_w - w + 1e-9, dx)
        ys = np.arange(0.0, frame_h - h + 1e-9, dy)
        # keep the flush right/bottom rows so border targets stay reachable
        if frame_w - w - xs[-1] > 1e-6:
            xs = np.append(xs, frame_w - w)
        if frame_h - h - ys[-1] > 1e-6:
            ys = np.append(ys, frame_h - h)
        gx, gy = np.meshgrid(xs, ys)
        chunk = np.empty((gx.size, 4))
        chunk[:, 0] = gx.ravel()
        chunk[:, 1] = gy.ravel()
        chunk[:, 2] = w
        chunk[:, 3] = h
        chunks.append(chunk)
    if not chunks:
        return np.empty((0, 4))
    return np.concatenate(chunks, axis=0)


def generate_pool(
    edges: EdgeMap | EdgeStructures, prev: Box, cfg: ProposalConfig
) -> list[Proposal]:
    """Scored, thresholded, NMS-filtered sliding-window pool around prev's size.

    Returns at most 4 * max_proposals proposals sorted by descending
    objectness (ties broken by raster order); the re-rank stage performs the
    final top-H cut. May be empty.
    """
    structures = (
        edges if isinstance(edges, EdgeStructures) else EdgeStructures.from_edge_map(edges)
    )
    if structures.frame_size is None:
        raise ValueError("EdgeStructures built without a frame size cannot generate pools")
    frame_w, frame_h = structures.frame_size
    if len(structures) == 0:
        return []
    wins = _window_grid(prev, float(frame_w), float(frame_h), cfg)
    if len(wins) == 0:
        return []
    scores = score_windows(structures, wins)
    sel = scores > cfg.e_threshold
    wins = wins[sel]
    scores = scores[sel]
    if len(wins) == 0:
        return []
    order = np.lexsort((wins[:, 0], wins[:, 1], -scores))
    wins = wins[order]
    scores = scores[order]
    keep = _greedy_nms_kernel(wins, cfg.beta, 4 * cfg.max_proposals)
    return [
        Proposal(box=Box(*(float(v) for v in wins[i])), objectness=float(scores[i]))
        for i in keep
    ]
