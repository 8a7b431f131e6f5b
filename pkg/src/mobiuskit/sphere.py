"""The model sphere S^n, its stereographic chart, and sampled-set metrics.

A point of S^n is a unit vector ``xi`` in R^{n+1}, standing for the null line
through ``(1, xi)``.  The basepoint ``o`` is ``xi = e_n`` (last axis); the
chart sends ``o`` to infinity and its antipode to the origin.
"""
from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .liegroup import GroupElement

UNIT_TOL = 1e-12
DEFAULT_RESOLUTION = 0.01


class PointAtInfinity(ValueError):
    """The chart is undefined at the basepoint ``o``."""


def basepoint(n: int) -> np.ndarray:
    o = np.zeros(n + 1)
    o[n] = 1.0
    return o


def antipode(n: int) -> np.ndarray:
    return -basepoint(n)


def _unit(points) -> np.ndarray:
    return points / np.linalg.norm(points, axis=-1, keepdims=True)


def act(g: GroupElement, p) -> np.ndarray:
    """Apply ``g`` to one point ``(n+1,)`` or a batch ``(N, n+1)`` of points."""
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    pts = np.atleast_2d(p)
    null = np.empty((pts.shape[0], pts.shape[1] + 1))
    null[:, 0] = 1.0
    null[:, 1:] = pts
    img = null @ g.mat.T
    # exact group elements keep img[:, 0] away from zero; dividing by the
    # spatial norm instead of img[:, 0] keeps the result on the sphere
    spatial = img[:, 1:]
    out = spatial / np.linalg.norm(spatial, axis=1, keepdims=True) * np.sign(img[:, :1])
    return out[0] if single else out


def chart(p, tol: float = 1e-14) -> np.ndarray:
    """Stereographic projection from ``o``: ``(y, s) -> y / (1 - s)``."""
    p = np.asarray(p, dtype=float)
    denom = 1.0 - p[..., -1]
    if np.any(denom <= tol):
        raise PointAtInfinity("chart(o) is the point at infinity")
    return p[..., :-1] / denom[..., None]


def chart_inv(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    return np.concatenate([2.0 * x / (1.0 + r2), (r2 - 1.0) / (r2 + 1.0)], axis=-1)


def s_plus(u) -> np.ndarray:
    """The chart of n+ (with o removed): Euclidean inversion ``u / |u|^2``."""
    u = np.asarray(u, dtype=float)
    r2 = np.sum(u * u, axis=-1, keepdims=True)
    if np.any(r2 == 0.0):
        raise ValueError("s_plus is undefined at 0")
    return u / r2


def round_distance(p, q) -> np.ndarray | float:
    """Great-circle distance in radians, in [0, pi].

    Uses ``2 atan2(|p - q|, |p + q|)``, which equals the clamped arccos of the
    inner product for unit vectors but keeps full precision near 0 and pi.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = 2.0 * np.arctan2(np.linalg.norm(p - q, axis=-1), np.linalg.norm(p + q, axis=-1))
    return float(d) if np.ndim(d) == 0 else d


def chord_to_angle(c):
    return 2.0 * np.arcsin(np.clip(np.asarray(c) / 2.0, 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class SampledSet:
    """A finite, nonempty sample of S^n with a target covering radius."""

    points: np.ndarray
    resolution: float = DEFAULT_RESOLUTION

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a SampledSet must be a nonempty (N, n+1) array")
        err = np.max(np.abs(np.linalg.norm(pts, axis=1) - 1.0))
        if err > UNIT_TOL:
            raise ValueError(f"points are not unit vectors (max deviation {err:.2e})")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def normalized(cls, points, resolution: float = DEFAULT_RESOLUTION) -> "SampledSet":
        return cls(_unit(np.atleast_2d(np.asarray(points, dtype=float))), resolution)

    @property
    def n(self) -> int:
        return self.points.shape[1] - 1

    def __len__(self) -> int:
        return self.points.shape[0]

    def mapped(self, g: GroupElement) -> "SampledSet":
        return SampledSet.normalized(act(g, self.points), self.resolution)


def directed_hausdorff(X: SampledSet, Y: SampledSet) -> float:
    """``sup_{x in X} inf_{y in Y} d(x, y)`` in radians."""
    tree = cKDTree(Y.points)
    _, idx = tree.query(X.points, k=1)
    return float(np.max(round_distance(X.points, Y.points[idx])))


def hausdorff(X: SampledSet, Y: SampledSet) -> float:
    if X.n != Y.n:
        raise ValueError("sets live on spheres of different dimension")
    return max(directed_hausdorff(X, Y), directed_hausdorff(Y, X))


def sup_distance_to(X: SampledSet, point) -> float:
    """Hausdorff distance from ``X`` to a single point."""
    return float(np.max(round_distance(X.points, np.asarray(point, dtype=float))))


def nearest_distances(grid: np.ndarray, X: SampledSet) -> np.ndarray:
    tree = cKDTree(X.points)
    _, idx = tree.query(grid, k=1)
    return round_distance(grid, X.points[idx])


def sphere_grid(d: int, spacing: float) -> np.ndarray:
    """Deterministic grid on S^d in R^{d+1} with neighbour spacing about ``spacing``.

    Built recursively by latitude bands measured from the last axis; poles are
    included and each band is a scaled grid of S^{d-1}.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if d == 0:
        return np.array([[-1.0], [1.0]])
    if d == 1:
        k = max(3, int(math.ceil(2 * math.pi / spacing)))
        th = 2 * math.pi * np.arange(k) / k
        return np.column_stack([np.cos(th), np.sin(th)])
    nlat = max(2, int(math.ceil(math.pi / spacing)))
    rows = []
    for phi in np.linspace(0.0, math.pi, nlat + 1):
        s = math.sin(phi)
        if s < 1e-12:
            pt = np.zeros(d + 1)
            pt[d] = math.cos(phi)
            rows.append(pt[None, :])
            continue
        sub = sphere_grid(d - 1, min(spacing / s, math.pi / 2))
        band = np.empty((sub.shape[0], d + 1))
        band[:, :d] = s * sub
        band[:, d] = math.cos(phi)
        rows.append(band)
    return np.vstack(rows)


def cube_sphere_grid(d: int, level: int) -> np.ndarray:
    """Radial projection onto S^d of the lattice ``2^-level Z^{d+1}`` on the cube surface.

    Grids are nested (level ``j`` is a subset of level ``j+1``) and every point of
    S^d lies within ``sqrt(d) * 2^-level`` radians of the level-``level`` grid.
    """
    m = 2 ** level
    ticks = np.arange(-m, m + 1) / m
    face = np.stack(np.meshgrid(*([ticks] * d), indexing="ij"), axis=-1).reshape(-1, d)
    blocks = []
    for axis in range(d + 1):
        for sign in (-1.0, 1.0):
            pts = np.insert(face, axis, sign, axis=1)
            # edges shared with an earlier face are kept only once
            earlier = np.abs(pts[:, :axis]) == 1.0
            blocks.append(pts[~np.any(earlier, axis=1)])
    return _unit(np.vstack(blocks))


def orthonormal_complement(c: np.ndarray) -> np.ndarray:
    """Rows spanning the orthogonal complement of the unit vector ``c``."""
    q, _ = np.linalg.qr(np.column_stack([c, np.eye(c.size)]))
    basis = q[:, 1:c.size].T
    return basis


def cap_grid(center, alpha: float, spacing: float) -> np.ndarray:
    """Points covering the closed cap of angular radius ``alpha`` around ``center``.

    Rings at polar angle ``beta`` in ``[0, alpha]`` (both ends included) are
    grids of S^{d-1} scaled by ``sin(beta)``.
    """
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    d = c.size
    if d == 1:
        return c[None, :]
    comp = orthonormal_complement(c)
    nring = max(1, int(math.ceil(alpha / spacing)))
    rows = [c[None, :]]
    for beta in np.linspace(0.0, alpha, nring + 1)[1:]:
        sb = math.sin(beta)
        sub = sphere_grid(d - 2, min(spacing / max(sb, 1e-300), math.pi / 2)) if d > 2 else np.array([[-1.0], [1.0]])
        rows.append(math.cos(beta) * c[None, :] + sb * sub @ comp)
    return _unit(np.vstack(rows))


# -- box counting ------------------------------------------------------------------

@dataclass(frozen=True)
class BoxCountResult:
    estimate: float
    residual: float
    scales: tuple[float, ...]
    counts: tuple[int, ...]
    flags: tuple[str, ...]
    estimator: str = "box-counting (upper proxy for Hausdorff dimension)"

    @property
    def degenerate(self) -> bool:
        return bool(self.flags)


def box_counts(points: np.ndarray, scales) -> np.ndarray:
    out = []
    for eps in scales:
        cells = np.floor(points / eps).astype(np.int64)
        out.append(np.unique(cells, axis=0).shape[0])
    return np.array(out)


def box_counting_dimension(X: SampledSet, scales) -> BoxCountResult:
    """Least-squares slope of ``log N(eps)`` against ``log(1/eps)``.

    Boxes are axis-aligned cubes of side ``eps`` in the ambient R^{n+1}.
    """
    scales = np.sort(np.asarray(scales, dtype=float))[::-1]
    flags = []
    if scales.size < 3:
        flags.append("fewer than 3 scales")
    if scales.size and scales[0] / scales[-1] < 10.0:
        flags.append("scales span less than one decade")
    if np.any(scales <= 0):
        raise ValueError("scales must be positive")
    counts = box_counts(X.points, scales)
    if counts[-1] >= len(X):
        flags.append("finest scale saturates the sample (every point in its own box)")
    x = np.log(1.0 / scales)
    y = np.log(counts.astype(float))
    if scales.size >= 2:
        A = np.column_stack([x, np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        slope = float(coef[0])
        resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    else:
        slope, resid = float("nan"), float("nan")
    return BoxCountResult(slope, resid, tuple(scales.tolist()), tuple(int(c) for c in counts), tuple(flags))


# -- CSV ------------------------------------------------------------------------------

def _atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows_to_csv(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join("%.17g" % v for v in r))
    return "\n".join(lines) + "\n"


def write_csv(X: SampledSet, path) -> Path:
    path = Path(path)
    header = [f"x{i}" for i in range(X.points.shape[1])]
    try:
        _atomic_write_text(path, _rows_to_csv(header, X.points))
    except OSError as exc:
        raise OSError(f"cannot write point cloud to {path}: {exc}") from exc
    return path


def read_csv(path, resolution: float = DEFAULT_RESOLUTION) -> SampledSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    if header != [f"x{i}" for i in range(len(header))]:
        raise ValueError(f"{path}: unexpected header {header}")
    return SampledSet(np.array(rows, dtype=float), resolution)


def chart_rows(X: SampledSet) -> np.ndarray:
    """Chart coordinates of every point; ``o`` maps to a row of ``inf``."""
    pts = X.points
    denom = 1.0 - pts[:, -1]
    out = np.full((pts.shape[0], pts.shape[1] - 1), np.inf)
    ok = denom > 1e-14
    out[ok] = pts[ok, :-1] / denom[ok, None]
    return out
