"""Left-invariant frame metric on O(1, n+1) and Cauchy-boundary probes.

The metric makes the left-translated basis ``g X_i`` orthonormal, so the length
of a short transition ``g -> h`` is the norm of ``coords(log(g^-1 h))``.
Distances are upper bounds from piecewise one-parameter paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .liegroup import (GroupElement, ParabolicElement, adjoint, algebra_basis, algebra_dim, boost, coords,
                       exp_algebra, kak, log_group, parabolic_to_matrix, plus_generator)
from .sphere import act, antipode, basepoint, round_distance

LOG_GUARD = 0.5
FD_STEP = 1e-5


class LogRegionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FrameMetric:
    n: int

    @property
    def basis(self) -> np.ndarray:
        return algebra_basis(self.n)

    def gram(self, g: GroupElement | None = None) -> np.ndarray:
        """Gram matrix of the frame ``{g X_i}`` read back through ``g^-1``."""
        B = self.basis
        if g is None:
            vecs = B
        else:
            vecs = np.einsum("ij,kjl->kil", g.inv().mat, np.einsum("ij,kjl->kil", g.mat, B))
        C = coords(vecs, self.n)
        return C @ C.T

    def norm(self, X) -> float:
        return float(np.linalg.norm(coords(X, self.n)))


@dataclass(frozen=True, eq=False)
class GroupPath:
    nodes: tuple[GroupElement, ...]

    def __post_init__(self):
        nodes = tuple(self.nodes)
        if not nodes:
            raise ValueError("a path needs at least one node")
        object.__setattr__(self, "nodes", nodes)

    def __add__(self, other: "GroupPath") -> "GroupPath":
        if np.max(np.abs(self.nodes[-1].mat - other.nodes[0].mat)) > 1e-12:
            raise ValueError("paths do not meet")
        return GroupPath(self.nodes + other.nodes[1:])

    def transitions(self) -> list[np.ndarray]:
        return [(a.inv() @ b).mat for a, b in zip(self.nodes, self.nodes[1:])]


def _step_length(a: GroupElement, b: GroupElement) -> float:
    if np.array_equal(a.mat, b.mat):
        return 0.0
    M = (a.inv() @ b).mat
    try:
        L = log_group(M, LOG_GUARD)
    except ValueError as exc:
        raise LogRegionError(str(exc)) from exc
    return float(np.linalg.norm(coords(L, a.n)))


def path_length(path: GroupPath) -> float:
    return float(sum(_step_length(a, b) for a, b in zip(path.nodes, path.nodes[1:])))


def one_parameter_path(g: GroupElement, X, N: int) -> GroupPath:
    return GroupPath(tuple(g @ exp_algebra((j / N) * np.asarray(X)) for j in range(N + 1)))


def _log_rotation(R: np.ndarray) -> np.ndarray:
    """Real skew logarithm of a rotation via its real Schur form (half-turns included)."""
    T, Q = scipy.linalg.schur(R, output="real")
    d = R.shape[0]
    L = np.zeros((d, d))
    minus = []
    i = 0
    while i < d:
        if i + 1 < d and abs(T[i + 1, i]) > 1e-12:
            ang = math.atan2(T[i + 1, i], T[i, i])
            L[i, i + 1], L[i + 1, i] = -ang, ang
            i += 2
            continue
        if T[i, i] < 0:
            minus.append(i)
        i += 1
    if len(minus) % 2:
        raise LogRegionError("compact factor is not in the identity component")
    for a, b in zip(minus[::2], minus[1::2]):
        # a pair of -1 eigenvalues is a half-turn in the plane (q_a, q_b)
        L[a, b], L[b, a] = -math.pi, math.pi
    out = Q @ L @ Q.T
    return 0.5 * (out - out.T)


def _log_compact(k: GroupElement) -> np.ndarray:
    m = k.mat
    if m[0, 0] < 0:
        raise LogRegionError("endpoints lie in different components of the group")
    L = np.zeros_like(m)
    L[1:, 1:] = _log_rotation(m[1:, 1:])
    return L


def kak_path(g: GroupElement, h: GroupElement, max_pieces: int = 4096) -> GroupPath:
    """Path from ``g`` to ``h`` through ``k1(s) a(s t) k2(s)``, subdivided until every step admits a log."""
    dec = kak(g.inv() @ h)
    L1, L2 = _log_compact(dec.k1), _log_compact(dec.k2)
    n = g.n
    pieces = 1
    while pieces <= max_pieces:
        nodes = [g]
        for j in range(1, pieces + 1):
            s = j / pieces
            nodes.append(g @ exp_algebra(s * L1) @ boost(s * dec.t, n) @ exp_algebra(s * L2))
        nodes[-1] = h
        path = GroupPath(tuple(nodes))
        try:
            path_length(path)
            return path
        except LogRegionError:
            pieces *= 2
    raise LogRegionError("could not subdivide the chord into log-admissible steps")


def _inv(m: np.ndarray) -> np.ndarray:
    J = np.ones(m.shape[0])
    J[0] = -1.0
    return (m.T * J[None, :]) * J[:, None]


def _seg(a: np.ndarray, b: np.ndarray, n: int) -> float:
    try:
        L = log_group(_inv(a) @ b, LOG_GUARD)
    except ValueError as exc:
        raise LogRegionError(str(exc)) from exc
    return float(np.linalg.norm(coords(L, n)))


def _descend(g: GroupElement, h: GroupElement, budget: int, max_nodes: int) -> tuple[float, GroupPath]:
    n = g.n
    try:
        path = GroupPath((g, h))
        best = path_length(path)
    except LogRegionError:
        path = kak_path(g, h)
        best = path_length(path)
    if budget == 0:
        return best, path
    B = algebra_basis(n)
    nodes = [x.mat for x in path.nodes]
    seg = [_seg(a, b, n) for a, b in zip(nodes, nodes[1:])]
    step = 0.25 * max(seg)
    for _ in range(budget):
        if len(nodes) < max_nodes:
            refined = [nodes[0]]
            for a, b in zip(nodes, nodes[1:]):
                refined.extend([a @ scipy.linalg.expm(0.5 * log_group(_inv(a) @ b, LOG_GUARD)), b])
            try:
                rseg = [_seg(a, b, n) for a, b in zip(refined, refined[1:])]
            except LogRegionError:
                rseg = None
            if rseg is not None and sum(rseg) <= best:
                nodes, seg, best = refined, rseg, sum(rseg)
            step = 0.25 * max(seg)
        moves = [scipy.linalg.expm(sgn * step * Xi) for Xi in B for sgn in (1.0, -1.0)]
        for j in range(1, len(nodes) - 1):
            for M in moves:
                trial = nodes[j] @ M
                try:
                    s0 = _seg(nodes[j - 1], trial, n)
                    s1 = _seg(trial, nodes[j + 1], n)
                except LogRegionError:
                    continue
                if s0 + s1 < seg[j - 1] + seg[j]:
                    nodes[j] = trial
                    seg[j - 1], seg[j] = s0, s1
        total = sum(seg)
        if total < best:
            best = total
        step *= 0.5
    return best, GroupPath(tuple(GroupElement(m) for m in nodes))


def approx_distance(g: GroupElement, h: GroupElement, budget: int = 0, max_nodes: int = 17) -> tuple[float, GroupPath]:
    """Upper bound on the frame-metric distance, with the path realizing it.

    Budget 0 is the one-parameter chord ``|log(g^-1 h)|`` (pre-subdivided along
    a KAK path when the log is out of range).  Each budget unit refines the path
    by midpoints and runs one sweep of accept-if-shorter coordinate descent with
    a halving step, so the bound is non-increasing in ``budget``.  Both
    directions are optimized and the shorter kept, making the result symmetric.
    """
    d1, p1 = _descend(g, h, budget, max_nodes)
    d2, p2 = _descend(h, g, budget, max_nodes)
    if d2 < d1:
        return d2, GroupPath(tuple(reversed(p2.nodes)))
    return d1, p1


# -- right action -------------------------------------------------------------------------

@dataclass(frozen=True)
class JacobianCheck:
    analytic: np.ndarray
    numeric: np.ndarray
    residual: float


def right_jacobian_check(p: GroupElement | ParabolicElement, g: GroupElement | None = None, step: float = FD_STEP) -> JacobianCheck:
    """Frame Jacobian of ``R_p`` at ``g``: analytic ``Ad(p^-1)`` vs central differences."""
    if isinstance(p, ParabolicElement):
        p = parabolic_to_matrix(p)
    n = p.n
    g = GroupElement.identity(n) if g is None else g
    B = algebra_basis(n)
    analytic = adjoint(p.inv())
    base_inv = (g @ p).inv()
    cols = []
    for Xi in B:
        fp = coords(log_group((base_inv @ g @ exp_algebra(step * Xi) @ p).mat, LOG_GUARD), n)
        fm = coords(log_group((base_inv @ g @ exp_algebra(-step * Xi) @ p).mat, LOG_GUARD), n)
        cols.append((fp - fm) / (2 * step))
    numeric = np.array(cols).T
    return JacobianCheck(analytic, numeric, float(np.max(np.abs(numeric - analytic))))


def bilipschitz_of_right_action(p: GroupElement | ParabolicElement) -> tuple[float, float]:
    if isinstance(p, ParabolicElement):
        p = parabolic_to_matrix(p)
    s = np.linalg.svd(adjoint(p.inv()), compute_uv=False)
    return float(s.min()), float(s.max())


def random_parabolic(n: int, rng: np.random.Generator, log_scale: float = 0.7, shift: float = 1.0) -> ParabolicElement:
    from .liegroup import random_orthogonal
    lam = math.exp(rng.uniform(-log_scale, log_scale))
    A = random_orthogonal(n, rng)
    v = rng.uniform(-shift, shift, size=n)
    return ParabolicElement(lam, A, v)


# -- Cauchy boundary probes -----------------------------------------------------------------

@dataclass(frozen=True)
class CauchyFixture:
    """``sphere-minus-point`` (deletes ``o``) or ``sphere-minus-two-points`` (``o`` and ``-o``)."""

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in ("sphere-minus-point", "sphere-minus-two-points", "codim-one"):
            raise ValueError(f"unknown Cauchy fixture {self.kind!r}")

    def deleted_points(self) -> np.ndarray:
        if self.kind == "sphere-minus-point":
            return basepoint(self.n)[None, :]
        if self.kind == "sphere-minus-two-points":
            return np.vstack([basepoint(self.n), antipode(self.n)])
        raise ValueError("the codim-one fixture is bookkeeping only")

    @property
    def deleted_dim(self) -> int:
        return self.n - 1 if self.kind == "codim-one" else 0

    def fiber_lift(self, q: int) -> GroupElement:
        """An element over the ``q``-th deleted point (identity over ``o``)."""
        if q == 0:
            return GroupElement.identity(self.n)
        return _half_turn(self.n)


def _half_turn(n: int) -> GroupElement:
    g = np.eye(n + 2)
    g[1, 1] = g[n + 1, n + 1] = -1.0
    return GroupElement(g)


@dataclass(frozen=True, eq=False)
class TailSpec:
    """Tail ``g_q p0 exp(2^-j Y)`` for ``j`` in ``exponents`` (``Y`` in n+)."""

    fiber: int
    p0: ParabolicElement
    Y: np.ndarray
    exponents: tuple[int, ...] = tuple(range(4, 21))

    def nodes(self, fixture: CauchyFixture) -> list[GroupElement]:
        base = fixture.fiber_lift(self.fiber) @ parabolic_to_matrix(self.p0)
        n = fixture.n
        X = sum(y * plus_generator(n, i) for i, y in enumerate(self.Y))
        return [base @ exp_algebra(2.0 ** (-j) * X) for j in self.exponents]

    def limit(self, fixture: CauchyFixture) -> GroupElement:
        return fixture.fiber_lift(self.fiber) @ parabolic_to_matrix(self.p0)


@dataclass
class CauchyReport:
    verdict: str  # Equivalent | Inequivalent
    coset_residual: float
    coset: list | None
    distances: list[float]
    boundary_distances: list[list[float]]
    threshold: float
    caveat: str = "upper bounds from one-parameter chords; shortcut authorized by the normality gate"


def cauchy_probe(fixture: CauchyFixture, tail1: TailSpec, tail2: TailSpec, threshold: float = 1e-3,
                 coset_tol: float = 1e-8) -> CauchyReport:
    """Decide whether two tails define the same Cauchy boundary point.

    Equivalent iff the limits differ by right multiplication by ``p`` in P
    (residual ``d(p . o, o)``), and the distance bounds between ``tail1_j p``
    and ``tail2_j`` decrease below ``threshold``.
    """
    if tail1.exponents != tail2.exponents:
        raise ValueError("tails must share a schedule")
    deleted = fixture.deleted_points()
    seqs = [tail1.nodes(fixture), tail2.nodes(fixture)]
    bdist = []
    for seq in seqs:
        d = [float(np.min(round_distance(deleted, act(g, basepoint(fixture.n))))) for g in seq]
        if not (d[-1] < d[0] and d[-1] < 1e-3):
            raise ValueError("tail does not approach the deleted fibers")
        bdist.append(d)
    lim1, lim2 = tail1.limit(fixture), tail2.limit(fixture)
    p = lim1.inv() @ lim2
    o = basepoint(fixture.n)
    residual = float(round_distance(act(p, o), o))
    if residual >= coset_tol:
        return CauchyReport("Inequivalent", residual, None, [], bdist, threshold)
    dists = [approx_distance(a @ p, b, 0)[0] for a, b in zip(*seqs)]
    ok = dists[-1] < threshold and dists[-1] <= dists[0]
    return CauchyReport("Equivalent" if ok else "Inequivalent", residual, p.mat.tolist(), dists, bdist, threshold)


@dataclass(frozen=True)
class NormalityGate:
    fixture: str
    n: int
    group_dim: int
    deleted_dim: int
    codimension: int
    normal: bool
    rationale: str


def normality_gate(fixture: CauchyFixture) -> NormalityGate:
    """Codimension of the deleted fibers in the bundle: ``n - dim(deleted set)``.

    Each deleted point carries a whole P-orbit (dimension ``dim G - n``), so the
    codimension in G is that of the deleted set in S^n.  Above 1, intrinsic and
    extrinsic distances near the boundary are comparable.
    """
    m = algebra_dim(fixture.n)
    codim = fixture.n - fixture.deleted_dim
    normal = codim > 1
    why = (f"deleted set of dimension {fixture.deleted_dim} in S^{fixture.n}; its fibers have dimension "
           f"{fixture.deleted_dim + m - fixture.n} in a {m}-dimensional group, codimension {codim}")
    why += "; intrinsic/extrinsic shortcut authorized" if normal else "; shortcut refused"
    return NormalityGate(fixture.kind, fixture.n, m, fixture.deleted_dim, codim, normal, why)
