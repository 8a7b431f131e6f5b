"""Finitely generated Kleinian groups acting on S^n.

Hyperbolic fixtures use the hemisphere ``Omega = {xi_0 > 0}``; the groups are
embedded in O(1, n+1) so that they fix the ambient axis ``e_1`` and act on
``(e_0, e_2, ..., e_{n+1})`` as O(1, n).  ``Omega`` then is a conformal copy of
H^n whose boundary ``{xi_0 = 0}`` is the sphere S^{n-1} carrying the limit set.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .liegroup import GroupElement, boost, kak, kak_residual, lorentz_form
from .sphere import (SampledSet, act, basepoint, cube_sphere_grid, hausdorff, nearest_distances,
                     round_distance)

log = logging.getLogger(__name__)

DEDUP_TOL = 1e-8
INTERIOR_CUTOFF = 8.0
MAX_ELEMENTS = 500_000
BOUNDARY_TOL = 1e-9


class BudgetExceeded(RuntimeError):
    pass


class FixtureError(ValueError):
    pass


# -- presentations and word balls ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GroupPresentation:
    generators: tuple[GroupElement, ...]
    labels: tuple[str, ...] = ()
    dim: int | None = None  # required only for the trivial group

    def __post_init__(self):
        gens = tuple(self.generators)
        if gens:
            n = gens[0].n
            if any(g.n != n for g in gens):
                raise ValueError("generators act on spheres of different dimension")
            if self.dim is not None and self.dim != n:
                raise ValueError("dim disagrees with the generators")
            for g in gens:
                if np.max(np.abs(g.mat - np.eye(n + 2))) < DEDUP_TOL:
                    raise ValueError("a generator equals the identity")
            object.__setattr__(self, "dim", n)
        elif self.dim is None:
            raise ValueError("the trivial group needs an explicit dim")
        labels = tuple(self.labels) or tuple(chr(ord("a") + i) for i in range(len(gens)))
        if len(labels) != len(gens):
            raise ValueError("one label per generator")
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def trivial(cls, n: int) -> "GroupPresentation":
        return cls((), dim=n)

    @property
    def n(self) -> int:
        return self.dim

    def letters(self) -> list[tuple[str, GroupElement]]:
        """Generators and their inverses; letter ``2i+1`` is the inverse of ``2i``."""
        out = []
        for lab, g in zip(self.labels, self.generators):
            out.append((lab, g))
            out.append((lab.upper(), g.inv()))
        return out


@dataclass(frozen=True)
class Word:
    letters: tuple[int, ...]
    element: GroupElement

    def spelled(self, pres: GroupPresentation) -> str:
        names = [lab for lab, _ in pres.letters()]
        return "".join(names[i] for i in self.letters) or "1"


def _dedup_key(mat: np.ndarray) -> np.ndarray:
    return (mat / np.linalg.norm(mat)).ravel()


def enumerate_words(G: GroupPresentation, L: int, max_elements: int = MAX_ELEMENTS,
                    dedup_tol: float = DEDUP_TOL) -> list[Word]:
    """Breadth-first reduced words of length <= L, deduplicated as group elements."""
    if L < 0:
        raise ValueError("L must be >= 0")
    ident = GroupElement.identity(G.n)
    words = [Word((), ident)]
    keys = [_dedup_key(ident.mat)]
    frontier = [words[0]]
    letters = G.letters()
    collisions = 0
    for _ in range(L):
        tree = cKDTree(np.array(keys))
        cand = []
        for w in frontier:
            last = w.letters[-1] if w.letters else None
            for i, (_, g) in enumerate(letters):
                if last is not None and i == last ^ 1:
                    continue
                cand.append(Word(w.letters + (i,), w.element @ g))
        if not cand:
            break
        ckeys = np.array([_dedup_key(c.element.mat) for c in cand])
        old_hit = tree.query(ckeys, k=1)[0] < dedup_tol
        # within the level, keep the first (BFS order) of each cluster
        dup = np.zeros(len(cand), dtype=bool)
        for i, j in sorted(cKDTree(ckeys).query_pairs(dedup_tol)):
            dup[j] = True
        keep = ~(old_hit | dup)
        collisions += int(np.count_nonzero(~keep))
        new_words = [c for c, k in zip(cand, keep) if k]
        if len(words) + len(new_words) > max_elements:
            raise BudgetExceeded(f"word ball exceeds {max_elements} elements at length {len(new_words[0].letters)}")
        words.extend(new_words)
        keys.extend(ckeys[keep])
        frontier = new_words
        if not frontier:
            break
    if collisions:
        log.info("word_ball: %d reduced words coincide with shorter ones (relations)", collisions)
    return words


def word_ball(G: GroupPresentation, L: int, max_elements: int = MAX_ELEMENTS,
              dedup_tol: float = DEDUP_TOL) -> list[GroupElement]:
    return [w.element for w in enumerate_words(G, L, max_elements, dedup_tol)]


# -- fixtures ------------------------------------------------------------------------------

def embed_hyperbolic(h) -> GroupElement:
    """Embed ``h`` in O(1, n) as an element of O(1, n+1) fixing the axis ``e_1``."""
    h = np.asarray(h, dtype=float)
    m = h.shape[0] + 1
    g = np.eye(m)
    idx = [0] + list(range(2, m))
    g[np.ix_(idx, idx)] = h
    return GroupElement(g)


def plane_rotation(n: int, i: int, j: int, angle: float) -> GroupElement:
    """Rotation of the sphere coordinates ``xi_i, xi_j`` by ``angle``."""
    g = np.eye(n + 2)
    c, s = math.cos(angle), math.sin(angle)
    a, b = i + 1, j + 1
    g[a, a] = g[b, b] = c
    g[a, b] = -s
    g[b, a] = s
    return GroupElement(g)


def schottky_group(t: float = 2.5, n: int = 2) -> GroupPresentation:
    """``<a(t), r a(t) r^-1>`` with ``r`` a quarter turn; both preserve the hemisphere."""
    a = boost(t, n)
    r = plane_rotation(n, n - 1, n, math.pi / 2)
    return GroupPresentation((a, r @ a @ r.inv()), ("a", "b"))


def schottky_disk_radius(t: float) -> float:
    """Angular radius of the boundary disks exchanged by a boost of length ``t``."""
    return math.acos(math.tanh(t / 2.0))


def schottky_separation(t: float) -> float:
    """Angle between adjacent disks of :func:`schottky_group` on the boundary circle."""
    return math.pi / 2 - 2.0 * schottky_disk_radius(t)


def schottky_disks(t: float, n: int = 2) -> tuple[np.ndarray, float]:
    """Centers (fixed points of the generators) and common radius of the four disks."""
    centers = []
    for g in schottky_group(t, n).generators:
        fp = attracting_fixed_point(g)
        centers.extend([fp, attracting_fixed_point(g.inv())])
    return np.array(centers), schottky_disk_radius(t)


def translation_group(n: int, v=None) -> GroupPresentation:
    from .liegroup import ParabolicElement, parabolic_to_matrix
    v = np.eye(n)[0] if v is None else np.asarray(v, dtype=float)
    return GroupPresentation((parabolic_to_matrix(ParabolicElement(1.0, v=v)),), ("t",))


# -- fixed points and limit sets ------------------------------------------------------------

def attracting_fixed_point(g: GroupElement, tol: float = 1e-9) -> np.ndarray | None:
    """Sphere point of the dominant real eigenline of ``g``, or ``None`` if ``g`` is not loxodromic."""
    vals, vecs = np.linalg.eig(g.mat)
    order = np.argsort(-np.abs(vals))
    top = vals[order[0]]
    if abs(top) <= 1.0 + tol or abs(abs(vals[order[1]]) - abs(top)) <= tol * abs(top):
        return None
    if abs(top.imag) > tol * abs(top):
        return None
    v = np.real(vecs[:, order[0]])
    if abs(v[0]) < 1e-300:
        return None
    xi = v[1:] / v[0]
    return xi / np.linalg.norm(xi)


@dataclass(frozen=True, eq=False)
class LimitSetApprox:
    points: np.ndarray
    method: str
    depth: int
    resolution: float = 0.01
    warnings: tuple[str, ...] = ()

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0

    def sampled(self) -> SampledSet:
        return SampledSet.normalized(self.points, self.resolution)

    def covering_radius(self) -> float:
        """Largest nearest-neighbour spacing within the set."""
        if len(self) < 2:
            return 0.0
        d, idx = cKDTree(self.points).query(self.points, k=2)
        return float(np.max(round_distance(self.points, self.points[idx[:, 1]])))


def preserves_hemisphere(g: GroupElement, tol: float = 1e-9) -> bool:
    """``g`` fixes ``e_1`` and is orthochronous, so it maps ``{xi_0 > 0}`` to itself."""
    m = g.mat
    e1 = np.zeros(m.shape[0])
    e1[1] = 1.0
    scale = max(1.0, np.max(np.abs(m)))
    return bool(np.max(np.abs(m[:, 1] - e1)) < tol * scale and np.max(np.abs(m[1, :] - e1)) < tol * scale and m[0, 0] > 0)


def _unique_rows(pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if pts.shape[0] == 0:
        return pts
    keep = []
    tree = cKDTree(pts)
    taken = np.zeros(pts.shape[0], dtype=bool)
    for i in range(pts.shape[0]):
        if taken[i]:
            continue
        keep.append(i)
        for j in tree.query_ball_point(pts[i], tol):
            taken[j] = True
    return pts[keep]


def limit_set(G: GroupPresentation, depth: int, method: str = "OrbitAccumulation", cutoff: float = INTERIOR_CUTOFF,
              t_min: float = 1.0, resolution: float = 0.01) -> LimitSetApprox:
    """Approximate the limit set on the hemisphere boundary.

    ``OrbitAccumulation`` pushes the hemisphere center ``xi = e_0`` by every word
    and keeps images at hyperbolic distance > ``cutoff`` (``cosh d = 1/xi_0``),
    projected radially onto ``{xi_0 = 0}``.  ``LoxodromicFixedPoints`` collects the
    attracting fixed points of words whose KAK length exceeds ``t_min``.
    """
    for g in G.generators:
        if not preserves_hemisphere(g):
            raise FixtureError("a generator does not preserve the hemisphere {xi_0 > 0}")
    n = G.n
    notes = []
    if not G.generators:
        notes.append("trivial group: empty limit set")
        return LimitSetApprox(np.zeros((0, n + 1)), method, depth, resolution, tuple(notes))
    words = enumerate_words(G, depth)
    if method == "OrbitAccumulation":
        x0 = np.zeros(n + 1)
        x0[0] = 1.0
        imgs = act_from_words(words, x0)
        far = imgs[:, 0] < 1.0 / math.cosh(cutoff)
        proj = imgs[far].copy()
        proj[:, 0] = 0.0
        pts = proj / np.linalg.norm(proj, axis=1, keepdims=True) if proj.size else proj
    elif method == "LoxodromicFixedPoints":
        rows = []
        for w in words[1:]:
            if kak(w.element).t <= t_min:
                continue
            fp = attracting_fixed_point(w.element)
            if fp is not None:
                rows.append(fp)
        pts = np.array(rows) if rows else np.zeros((0, n + 1))
        if pts.size:
            pts[:, 0] = np.where(np.abs(pts[:, 0]) < BOUNDARY_TOL, 0.0, pts[:, 0])
    else:
        raise ValueError(f"unknown limit-set method {method!r}")
    pts = _unique_rows(pts)
    if pts.shape[0] and np.max(np.abs(pts[:, 0])) > BOUNDARY_TOL:
        raise FixtureError("limit points off the boundary sphere")
    if pts.shape[0] == 0:
        msg = "no loxodromic words found: empty limit set (elliptic or parabolic generators?)"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return LimitSetApprox(pts, method, depth, resolution, tuple(notes))


def act_from_words(words: Sequence[Word], x) -> np.ndarray:
    return np.array([act(w.element, x) for w in words])


# -- density and maximality ------------------------------------------------------------------

def boundary_grid(n: int, epsilon: float) -> np.ndarray:
    """Nested grid on ``{xi_0 = 0}`` with neighbour spacing <= ``epsilon/2``."""
    d = n - 1
    level = max(0, math.ceil(math.log2(2.0 / epsilon)))
    g = cube_sphere_grid(d, level)
    return np.hstack([np.zeros((g.shape[0], 1)), g])


@dataclass(frozen=True)
class DensityReport:
    dense: bool
    epsilon: float
    max_gap_distance: float  # largest distance from a grid point to the limit set
    gap: float               # diameter of the largest empty cap found
    gap_center: np.ndarray | None
    grid_size: int

    @property
    def verdict(self) -> str:
        return f"Dense({self.epsilon:g})" if self.dense else "NotDense"


def density_report(Lam: LimitSetApprox, epsilon: float) -> DensityReport:
    """``Dense(eps)`` iff every point of a nested boundary grid lies within ``eps`` of ``Lam``.

    Grids at larger ``eps`` are subsets of grids at smaller ``eps``, so density
    is monotone in ``eps``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n = Lam.points.shape[1] - 1
    grid = boundary_grid(n, epsilon)
    if Lam.empty:
        return DensityReport(False, epsilon, math.pi, math.pi, grid[0], grid.shape[0])
    dist = nearest_distances(grid, Lam.sampled())
    i = int(np.argmax(dist))
    worst = float(dist[i])
    return DensityReport(worst <= epsilon, epsilon, worst, 2.0 * worst, grid[i], grid.shape[0])


@dataclass(frozen=True)
class OmegaFixture:
    """``hemisphere`` | ``sphere-minus-point`` | ``sphere-minus-sphere`` (deleting ``{xi_m = ... = xi_n = 0}``)."""

    kind: str
    n: int
    m: int = 0

    def __post_init__(self):
        if self.kind not in ("hemisphere", "sphere-minus-point", "sphere-minus-sphere"):
            raise FixtureError(f"unknown fixture {self.kind!r}")
        if self.kind == "sphere-minus-sphere" and not (1 <= self.m <= self.n):
            raise FixtureError("sphere-minus-sphere needs 1 <= m <= n")

    def deleted_sample(self, count: int = 64) -> np.ndarray:
        if self.kind == "sphere-minus-point":
            return basepoint(self.n)[None, :]
        if self.kind == "sphere-minus-sphere":
            s = cube_sphere_grid(self.m - 1, 3) if self.m > 1 else np.array([[-1.0], [1.0]])
            return np.hstack([s, np.zeros((s.shape[0], self.n + 1 - self.m))])
        raise FixtureError("the hemisphere fixture has no deleted set")


@dataclass(frozen=True)
class MaximalityVerdict:
    verdict: str  # Maximal | MaximalAtResolution | NotMaximal
    fixture: str
    caveat: str
    gap: float | None = None
    gap_center: list | None = None
    details: dict = field(default_factory=dict)


def _fixes_points(g: GroupElement, pts: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.max(round_distance(act(g, pts), pts)) < tol)


def maximality_verdict(G: GroupPresentation, omega: OmegaFixture, epsilon: float = 0.05, depth: int = 8) -> MaximalityVerdict:
    nontrivial = len(G.generators) > 0
    if omega.kind == "hemisphere":
        Lam = limit_set(G, depth, "OrbitAccumulation") if nontrivial else LimitSetApprox(
            np.zeros((0, omega.n + 1)), "OrbitAccumulation", depth)
        rep = density_report(Lam, epsilon)
        caveat = (f"limit set sampled at word length {depth}; density at resolution {epsilon:g} "
                  "is one-sided evidence for a full limit set")
        details = {"limit_points": len(Lam), "grid_points": rep.grid_size, "max_gap_distance": rep.max_gap_distance}
        if rep.dense:
            return MaximalityVerdict("MaximalAtResolution", omega.kind, caveat, details=details)
        return MaximalityVerdict("NotMaximal", omega.kind, caveat, rep.gap,
                                 None if rep.gap_center is None else rep.gap_center.tolist(), details)
    deleted = omega.deleted_sample()
    fixing = [_fixes_points(g, deleted) for g in G.generators]
    caveat = "verdict from generator checks on the deleted set (sampled); discreteness is assumed"
    details = {"generators_fix_deleted_set": fixing}
    if omega.kind == "sphere-minus-point" and not all(fixing):
        raise FixtureError("a generator moves the deleted point, so it does not preserve Omega")
    if nontrivial and all(fixing):
        return MaximalityVerdict("Maximal", omega.kind, caveat, details=details)
    return MaximalityVerdict("NotMaximal", omega.kind, caveat, details=details)


# -- simple divergence ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SimpleDivergence:
    simple: bool
    l1: np.ndarray | None
    l2: np.ndarray | None
    t: list[float]
    p_plus: np.ndarray | None
    p_minus: np.ndarray | None
    reconstruction_residuals: list[float]
    reason: str = ""


def simple_divergence(gammas: Sequence[GroupElement], stab_tol: float = 1e-6, t_threshold: float = 5.0) -> SimpleDivergence:
    """KAK each term; simple divergence means the K-factors stabilize on the tail.

    ``p_plus = l1 . o`` and ``p_minus = l2^-1 . (-o)``, where ``o`` and ``-o``
    are the attracting and repelling fixed points of ``a(t)``.
    """
    gammas = list(gammas)
    if len(gammas) < 4:
        raise ValueError("need at least 4 terms")
    decs = [kak(g) for g in gammas]
    ts = [d.t for d in decs]
    res = [kak_residual(g, d) for g, d in zip(gammas, decs)]
    tail = ts[-4:]
    if not (all(b > a for a, b in zip(tail, tail[1:])) and tail[-1] >= t_threshold):
        raise ValueError("sequence is bounded: KAK lengths do not tend to infinity")
    k1 = np.array([d.k1.mat for d in decs[-4:]])
    k2 = np.array([d.k2.mat for d in decs[-4:]])
    var1 = float(np.max(np.abs(k1 - k1[-1])))
    var2 = float(np.max(np.abs(k2 - k2[-1])))
    if var1 >= stab_tol or var2 >= stab_tol:
        return SimpleDivergence(False, None, None, ts, None, None, res,
                                f"K-factors do not stabilize (tail variation {max(var1, var2):.3g}); pass a subsequence")
    n = gammas[0].n
    o = basepoint(n)
    l1 = decs[-1].k1
    l2 = decs[-1].k2
    return SimpleDivergence(True, l1.mat, l2.mat, ts, act(l1, o), act(l2.inv(), -o), res)


# -- projective model -----------------------------------------------------------------------

def q1n(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(-u[..., 0] * v[..., 0] + np.sum(u[..., 1:] * v[..., 1:], axis=-1))


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        nw = np.linalg.norm(w)
        if nw == 0:
            raise ValueError("zero vector")
        w = w / nw
        nz = np.flatnonzero(np.abs(w) > 0)
        if w[nz[0]] < 0:
            w = -w
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


def hemisphere_to_projective(xi) -> ProjectivePoint:
    """Sphere point with ``xi_0 >= 0`` to its line in R^{1,n} (``(xi_0, xi') -> [1 : xi']``)."""
    xi = np.asarray(xi, dtype=float)
    return ProjectivePoint(np.concatenate([[1.0], xi[1:]]))


@dataclass(frozen=True, eq=False)
class SigmaHyperplane:
    """Hyperplane ``q(w, u_x) = 0``; on the double cover the lifted ``Omega`` pairs negative."""

    u: np.ndarray

    def functional(self, w) -> np.ndarray | float:
        w = np.asarray(w, dtype=float)
        return -w[..., 0] * self.u[0] + w[..., 1:] @ self.u[1:]

    def side(self, w) -> np.ndarray | int:
        return np.sign(self.functional(w))


def sigma_hyperplane(x: ProjectivePoint, tol: float = 1e-9) -> SigmaHyperplane:
    """Tangent hyperplane to ``dOmega`` at an isotropic ``x``.

    ``u_x`` is ``x`` with positive first coordinate, so the future cone
    ``{q < 0, w_0 > 0}`` (the lift of ``Omega``) lies strictly on the negative side.
    """
    w = x.w
    if abs(q1n(w, w)) > tol:
        raise ValueError(f"point is not isotropic (q = {q1n(w, w):.3g})")
    u = w if w[0] > 0 else -w
    return SigmaHyperplane(u.copy())


# -- properness ---------------------------------------------------------------------------

@dataclass
class PropernessReport:
    depth: int
    free: bool
    fixed_witness: dict | None
    pair_counts: dict
    counts_stable: bool
    max_count: int
    passed: bool
    caveat: str


def properness_probe(G: GroupPresentation, sample: SampledSet, depth: int, fix_tol: float = 1e-6,
                     ball_radius: float = 0.05) -> PropernessReport:
    """Free-action and properness evidence at word length ``depth``.

    Freeness: no non-identity word moves a sample point by less than ``fix_tol``.
    Properness: for every ordered pair of sample points the number of words
    mapping one into the ``ball_radius``-ball of the other is counted at depth
    ``L-1`` and ``L``; equal counts are taken as evidence of finiteness.
    """
    caveat = f"evidence at depth {depth}, not a proof"
    if not G.generators:
        return PropernessReport(depth, True, None, {}, True, 0, True, caveat + " (trivial group)")
    words = enumerate_words(G, depth)
    pts = sample.points
    witness = None
    lengths = np.array([len(w.letters) for w in words])
    counts_L = np.zeros((len(pts), len(pts)), dtype=np.int64)
    counts_prev = np.zeros_like(counts_L)
    tree = cKDTree(pts)
    chord = 2.0 * math.sin(ball_radius / 2.0)
    for w, ln in zip(words, lengths):
        img = act(w.element, pts)
        if ln > 0 and witness is None:
            moved = round_distance(img, pts)
            j = int(np.argmin(moved))
            if moved[j] < fix_tol:
                witness = {"word": list(w.letters), "point": pts[j].tolist(), "displacement": float(moved[j])}
        for i, hits in enumerate(tree.query_ball_point(img, chord)):
            for j in hits:
                counts_L[i, j] += 1
                if ln < depth:
                    counts_prev[i, j] += 1
    stable = bool(np.array_equal(counts_L, counts_prev))
    nz = np.argwhere(counts_L > 0)
    pair_counts = {f"{i}->{j}": int(counts_L[i, j]) for i, j in nz}
    free = witness is None
    return PropernessReport(depth, free, witness, pair_counts, stable, int(counts_L.max()), free and stable, caveat)
