"""Intrinsic versus extrinsic distances in Euclidean domains.

Intrinsic distances are shortest paths on the lattice ``origin + h Z^d`` with all
``3^d - 1`` axis and diagonal moves.  Each domain exposes a clearance function
``gap`` that is ``K``-Lipschitz and bounds ``K`` times the Euclidean distance to
the complement from below.  With margin ``m = h/4``:

* a node is valid when ``gap >= 1.5 K m``;
* an edge is valid when ``gap >= 1.5 K m`` at samples spaced at most ``m``
  along it, which certifies a clearance of at least ``m`` on the whole segment.

Halving ``h`` turns every valid coarse edge into two valid fine edges, so grids
are nested and estimates can only decrease under refinement.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .kernels import grid_dijkstra


class Unreachable(RuntimeError):
    pass


def metrication_constant(d: int) -> float:
    """Worst ratio of shortest ``3^d - 1``-neighbour grid length to Euclidean length."""
    k = np.arange(1, d + 1)
    return float(np.linalg.norm(np.sqrt(k) - np.sqrt(k - 1)))


def grid_slack(d: int, h: float, euclid: float) -> float:
    """``eta(h)``: metrication excess plus the cost of snapping both endpoints to the grid."""
    return metrication_constant(d) - 1.0 + 2.0 * math.sqrt(d) * h / euclid


# -- domains --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LipschitzGraphDomain:
    """``{(z, t) : t > f(z)}`` (epigraph) or ``{t < f(z)}`` (hypograph) inside ``box``.

    ``f`` maps an ``(N, d-1)`` array to ``(N,)`` and is ``k``-Lipschitz.
    """

    f: Callable[[np.ndarray], np.ndarray]
    k: float
    box: np.ndarray  # (d, 2) lower/upper corners
    side: str = "epigraph"
    label: str = "graph"

    def __post_init__(self):
        object.__setattr__(self, "box", np.asarray(self.box, dtype=float))
        if self.side not in ("epigraph", "hypograph"):
            raise ValueError("side must be 'epigraph' or 'hypograph'")

    @property
    def dim(self) -> int:
        return self.box.shape[0]

    @property
    def lipschitz(self) -> float:
        return math.sqrt(1.0 + self.k ** 2)

    @property
    def bound(self) -> float:
        """Intrinsic/extrinsic ratio bound ``sqrt(1 + k^2)``."""
        return self.lipschitz

    def gap(self, x: np.ndarray) -> np.ndarray:
        val = x[..., -1] - self.f(x[..., :-1].reshape(-1, self.dim - 1)).reshape(x.shape[:-1])
        return val if self.side == "epigraph" else -val

    def empirical_lipschitz(self, rng: np.random.Generator, count: int = 2000) -> float:
        lo, hi = self.box[:-1, 0], self.box[:-1, 1]
        a = rng.uniform(lo, hi, size=(count, self.dim - 1))
        b = rng.uniform(lo, hi, size=(count, self.dim - 1))
        num = np.abs(self.f(a) - self.f(b))
        den = np.linalg.norm(a - b, axis=1)
        return float(np.max(num[den > 0] / den[den > 0]))


def cone_graph(k: float = 1.0, half_width: float = 2.0) -> LipschitzGraphDomain:
    """Complement of the hypograph of ``-k|z|``: ``{t > -k |z|}`` in the plane."""
    box = np.array([[-half_width, half_width], [-half_width, half_width]])
    return LipschitzGraphDomain(lambda z: -k * np.abs(z[:, 0]), k, box, label=f"cone k={k:g}")


def half_space(d: int = 2, half_width: float = 2.0) -> LipschitzGraphDomain:
    box = np.tile([-half_width, half_width], (d, 1)).astype(float)
    return LipschitzGraphDomain(lambda z: np.zeros(z.shape[0]), 0.0, box, label="half-space")


@dataclass(frozen=True, eq=False)
class SmallBoundaryDomain:
    """``box`` minus finitely many points, or minus a round sphere of dimension ``d - 2``.

    ``sphere`` is ``(center, radius, normal)``: the sphere of that radius in the
    hyperplane through ``center`` orthogonal to ``normal``.
    """

    box: np.ndarray
    points: np.ndarray | None = None
    sphere: tuple | None = None
    label: str = "small boundary"

    def __post_init__(self):
        object.__setattr__(self, "box", np.asarray(self.box, dtype=float))
        if self.points is not None:
            object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))
        if (self.points is None) == (self.sphere is None):
            raise ValueError("give exactly one of points / sphere")

    @property
    def dim(self) -> int:
        return self.box.shape[0]

    lipschitz = 1.0
    bound = 1.0

    @property
    def deleted_dim(self) -> int:
        return 0 if self.points is not None else self.dim - 2

    def gap(self, x: np.ndarray) -> np.ndarray:
        if self.points is not None:
            diff = x[..., None, :] - self.points
            return np.min(np.linalg.norm(diff, axis=-1), axis=-1)
        c, r, nrm = self.sphere
        c = np.asarray(c, dtype=float)
        nrm = np.asarray(nrm, dtype=float) / np.linalg.norm(nrm)
        y = x - c
        par = y @ nrm
        perp = np.linalg.norm(y - par[..., None] * nrm, axis=-1)
        return np.sqrt(par ** 2 + (perp - r) ** 2)

    def deleted_sample(self, count: int = 4096) -> np.ndarray:
        if self.points is not None:
            return self.points
        c, r, nrm = self.sphere
        nrm = np.asarray(nrm, dtype=float) / np.linalg.norm(nrm)
        q, _ = np.linalg.qr(np.column_stack([nrm, np.eye(self.dim)]))
        basis = q[:, 1:self.dim].T
        rng = np.random.default_rng(0)
        u = rng.normal(size=(count, self.dim - 1))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return np.asarray(c) + r * u @ basis


@dataclass(frozen=True, eq=False)
class ProductDomain:
    """``base x [fiber interval]^m``, with the fiber coordinates appended last."""

    base: LipschitzGraphDomain | SmallBoundaryDomain
    fiber_box: np.ndarray

    @property
    def box(self) -> np.ndarray:
        return np.vstack([self.base.box, np.asarray(self.fiber_box, dtype=float).reshape(-1, 2)])

    @property
    def dim(self) -> int:
        return self.box.shape[0]

    @property
    def lipschitz(self) -> float:
        return self.base.lipschitz

    def gap(self, x: np.ndarray) -> np.ndarray:
        return self.base.gap(x[..., :self.base.dim])


# -- grid estimator ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridPathEstimator:
    """Valid nodes/edges of a domain on ``box[:, 0] + h Z^d``, built once per ``h``."""

    domain: object
    h: float
    shape: tuple[int, ...] = field(init=False)
    moves: np.ndarray = field(init=False)
    offsets: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)
    node_valid: np.ndarray = field(init=False)
    edge_valid: np.ndarray = field(init=False)

    def __post_init__(self):
        box = self.domain.box
        d = box.shape[0]
        counts = np.floor((box[:, 1] - box[:, 0]) / self.h + 1e-9).astype(int) + 1
        shape = tuple(int(c) for c in counts)
        moves = np.array([m for m in itertools.product((-1, 0, 1), repeat=d) if any(m)], dtype=np.int64)
        strides = np.array([int(np.prod(shape[i + 1:])) for i in range(d)], dtype=np.int64)
        offsets = moves @ strides
        # both halves of a refined move must carry exactly half the weight
        weights = self.h * np.sqrt(np.sum(moves ** 2, axis=1).astype(float))
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "moves", moves)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "weights", weights)
        self._build()

    @property
    def margin(self) -> float:
        return self.h / 4.0

    @property
    def threshold(self) -> float:
        return 1.5 * self.domain.lipschitz * self.margin

    def coords(self, idx: np.ndarray) -> np.ndarray:
        return self.domain.box[:, 0] + self.h * np.stack(np.unravel_index(idx, self.shape), axis=-1)

    def _build(self, chunk: int = 200_000) -> None:
        N = int(np.prod(self.shape))
        d = len(self.shape)
        node_valid = np.zeros(N, dtype=np.uint8)
        edge_valid = np.zeros((N, len(self.moves)), dtype=np.uint8)
        move_len = np.sqrt(np.sum(self.moves ** 2, axis=1)) * self.h
        n_samples = np.ceil(move_len / self.margin).astype(int)
        for start in range(0, N, chunk):
            idx = np.arange(start, min(N, start + chunk))
            grid = np.stack(np.unravel_index(idx, self.shape), axis=-1)
            x = self.domain.box[:, 0] + self.h * grid
            nv = self.domain.gap(x) >= self.threshold
            node_valid[idx] = nv
            for m, mv in enumerate(self.moves):
                tgt = grid + mv
                inside = np.all((tgt >= 0) & (tgt < np.array(self.shape)), axis=1) & nv
                ok = inside.copy()
                sel = np.flatnonzero(inside)
                if sel.size:
                    xs = x[sel]
                    step = self.h * mv
                    good = np.ones(sel.size, dtype=bool)
                    for s in np.linspace(0.0, 1.0, n_samples[m] + 1)[1:]:
                        good &= self.domain.gap(xs + s * step) >= self.threshold
                    ok[sel] = good
                edge_valid[idx, m] = ok
        object.__setattr__(self, "node_valid", node_valid)
        object.__setattr__(self, "edge_valid", edge_valid)

    def segment_ok(self, a: np.ndarray, b: np.ndarray) -> bool:
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / self.margin)))
        s = np.linspace(0.0, 1.0, n + 1)[:, None]
        return bool(np.all(self.domain.gap(a + s * (b - a)) >= self.threshold))

    def snap(self, x: np.ndarray) -> tuple[int, float]:
        """Nearest valid corner of the cell around ``x`` reachable by a valid segment."""
        rel = (x - self.domain.box[:, 0]) / self.h
        base = np.floor(rel).astype(int)
        best = None
        for corner in itertools.product((0, 1), repeat=len(self.shape)):
            g = base + np.array(corner)
            if np.any(g < 0) or np.any(g >= np.array(self.shape)):
                continue
            i = int(np.ravel_multi_index(tuple(g), self.shape))
            if not self.node_valid[i]:
                continue
            p = self.domain.box[:, 0] + self.h * g
            dist = float(np.linalg.norm(p - x))
            if not self.segment_ok(x, p):
                continue
            if best is None or (dist, i) < best[:2]:
                best = (dist, i)
        if best is None:
            raise Unreachable(f"no valid grid node next to {x.tolist()} at h={self.h}")
        return best[1], best[0]

    def distance(self, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if tuple(y) < tuple(x):
            x, y = y, x
        ix, dx = self.snap(x)
        iy, dy = self.snap(y)
        g = grid_dijkstra(self.node_valid, self.edge_valid, self.offsets, self.weights, ix, iy)
        if math.isinf(g):
            raise Unreachable(f"{x.tolist()} and {y.tolist()} are disconnected at h={self.h}")
        return dx + g + dy


@dataclass(frozen=True)
class IntrinsicEstimate:
    value: float
    euclidean: float
    h: float
    eta: float

    @property
    def ratio(self) -> float:
        return self.value / self.euclidean if self.euclidean > 0 else 1.0


def intrinsic_distance(domain, x, y, h: float, estimator: GridPathEstimator | None = None) -> IntrinsicEstimate:
    est = estimator if estimator is not None else GridPathEstimator(domain, h)
    if est.h != h:
        raise ValueError("estimator built for a different spacing")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    e = float(np.linalg.norm(x - y))
    value = est.distance(x, y)
    eta = grid_slack(len(x), h, e) if e > 0 else 0.0
    return IntrinsicEstimate(value, e, h, eta)


@dataclass
class BilipschitzReport:
    worst_ratio: float
    worst_pair: tuple | None
    bound: float
    eta_at_worst: float
    passed: bool
    pairs: int
    unreachable: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    note: str = "finite sample of pairs: necessary instances only"


def bilipschitz_report(domain, pairs: Sequence, h: float, bound: float | None = None,
                       estimator: GridPathEstimator | None = None) -> BilipschitzReport:
    """Worst intrinsic/extrinsic ratio; each pair must satisfy ``ratio <= bound (1 + eta(h))``."""
    bound = domain.bound if bound is None else bound
    est = estimator if estimator is not None else GridPathEstimator(domain, h)
    worst, worst_pair, worst_eta = 0.0, None, 0.0
    unreachable, violations, rows = [], [], []
    for x, y in pairs:
        try:
            r = intrinsic_distance(domain, x, y, h, est)
        except Unreachable as exc:
            unreachable.append(str(exc))
            continue
        rows.append((list(map(float, x)), list(map(float, y)), r.value, r.euclidean, r.ratio, r.eta))
        if r.ratio > bound * (1.0 + r.eta):
            violations.append(rows[-1])
        if r.ratio > worst:
            worst, worst_pair, worst_eta = r.ratio, (list(map(float, x)), list(map(float, y))), r.eta
    return BilipschitzReport(worst, worst_pair, bound, worst_eta, not violations, len(rows),
                             unreachable, violations, rows)


def random_pairs(domain, count: int, rng: np.random.Generator, margin: float, shrink: float = 0.9,
                 min_separation: float = 0.5) -> list:
    """Pairs of points with clearance at least ``margin`` and at least ``min_separation`` apart."""
    lo, hi = domain.box[:, 0], domain.box[:, 1]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * shrink
    out = []
    while len(out) < count:
        pts = rng.uniform(mid - half, mid + half, size=(4 * count, len(lo)))
        pts = pts[domain.gap(pts) >= margin * domain.lipschitz]
        for a, b in zip(pts[0::2], pts[1::2]):
            if len(out) < count and np.linalg.norm(a - b) >= min_separation:
                out.append((a, b))
    return out


# -- product lemmas ---------------------------------------------------------------------

@dataclass(frozen=True)
class ProductLength:
    length: float
    minimum: float
    slack: float
    bound_ok: bool


def product_min_length(L: float, y1, y2, beta: np.ndarray | None = None, slack: float = 1e-8) -> ProductLength:
    """Length of ``s -> (s, beta(s))`` on ``[0, L]`` against ``sqrt(L^2 + |y2 - y1|^2)``.

    ``beta`` holds samples on a uniform grid of ``[0, L]``; the length is the
    trapezoid rule applied to ``sqrt(1 + |beta'|^2)``.  Without ``beta`` the
    linear interpolation, which realizes the minimum, is used.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    y1 = np.atleast_1d(np.asarray(y1, dtype=float))
    y2 = np.atleast_1d(np.asarray(y2, dtype=float))
    minimum = math.sqrt(L * L + float(np.sum((y2 - y1) ** 2)))
    if beta is None:
        return ProductLength(minimum, minimum, slack, True)
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 1:
        beta = beta[:, None]
    if np.max(np.abs(beta[0] - y1)) > 1e-12 or np.max(np.abs(beta[-1] - y2)) > 1e-12:
        raise ValueError("beta endpoints do not match y1, y2")
    ds = L / (beta.shape[0] - 1)
    deriv = np.gradient(beta, ds, axis=0, edge_order=2)
    integrand = np.sqrt(1.0 + np.sum(deriv ** 2, axis=1))
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    length = float(trapezoid(integrand, dx=ds))
    return ProductLength(length, minimum, slack, length >= minimum - slack)


@dataclass
class FiberedReport:
    worst_ratio: float
    K: float
    k_base: float
    passed: bool
    composite_ok: bool
    pairs: int
    rows: list
    unreachable: list


def fibered_constant_check(base, fiber_box, pairs: Sequence, h: float,
                           estimator: GridPathEstimator | None = None) -> FiberedReport | BilipschitzReport:
    """Product-domain ratio against ``K = 2 k_base`` and the composite ``sqrt((k L)^2 + dy^2)`` bound.

    An empty ``fiber_box`` reduces to :func:`bilipschitz_report` on the base.
    """
    fiber_box = np.asarray(fiber_box, dtype=float).reshape(-1, 2)
    if fiber_box.shape[0] == 0:
        return bilipschitz_report(base, pairs, h)
    dom = ProductDomain(base, fiber_box)
    est = estimator if estimator is not None else GridPathEstimator(dom, h)
    k_base = base.bound
    K = 2.0 * k_base
    d0 = base.dim
    rows, unreachable = [], []
    passed = composite_ok = True
    worst = 0.0
    for x, y in pairs:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        try:
            r = intrinsic_distance(dom, x, y, h, est)
        except Unreachable as exc:
            unreachable.append(str(exc))
            continue
        L = float(np.linalg.norm(x[:d0] - y[:d0]))
        dy = float(np.linalg.norm(x[d0:] - y[d0:]))
        composite = math.sqrt((k_base * L) ** 2 + dy ** 2)
        ok_K = r.ratio <= K * (1.0 + r.eta)
        ok_comp = composite <= K * math.sqrt(L * L + dy * dy) + 1e-12 and r.value <= composite * (1.0 + r.eta)
        passed &= ok_K
        composite_ok &= ok_comp
        worst = max(worst, r.ratio)
        rows.append((x.tolist(), y.tolist(), r.value, r.euclidean, r.ratio, r.eta, composite))
    return FiberedReport(worst, K, k_base, passed and composite_ok, composite_ok, len(rows), rows, unreachable)
