"""Conformal cones in the flat model and their dynamics under P.

In the chart, the cone ``C(B, lam)`` with vertex ``o`` is::

    {o}  U  { x : |x| >= 1/lam,  angle(x, center) <= alpha }

so on the sphere it is the set of points within ``2 atan(lam)`` of ``o`` whose
chart direction lies in the cap ``B``.  A diverging sequence ``p_k`` of chart
similarities either crushes a subcone onto ``o`` (``ShrinkToVertex``) or, after
renormalization by bounded ``l_k``, converges to a fixed cone
(``Renormalizable``).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .liegroup import ParabolicElement, parabolic_to_matrix
from .sphere import (SampledSet, act, basepoint, cap_grid, chart, chart_inv, hausdorff,
                     round_distance, sup_distance_to)

DEFAULT_SCHEDULE = tuple(2 ** j for j in range(13))
STABILIZATION_RTOL = 1e-6
DIVERGENCE_THRESHOLD = 1e2
LIMIT_INF_THRESHOLD = 1e3
DEFAULT_MARGIN = 0.1
MIN_ALPHA = 1e-6
MAX_POINTS = 2_000_000


class SamplingBudgetError(MemoryError):
    def __init__(self, required: int, budget: int):
        super().__init__(f"cone sample needs {required} points, budget is {budget}")
        self.required = required
        self.budget = budget


class NonDivergentError(ValueError):
    pass


class NonStabilizingError(ValueError):
    """Limits do not settle along the schedule; pass a subsequence or assert limits."""


class MarginError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Cone:
    """Chart cone: direction cap ``(center, alpha)`` and scale ``lam``."""

    center: np.ndarray
    alpha: float
    lam: float

    def __post_init__(self):
        c = np.array(self.center, dtype=float)
        norm = np.linalg.norm(c)
        if norm == 0:
            raise ValueError("cone center must be nonzero")
        c = c / norm
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not (MIN_ALPHA < self.alpha < math.pi / 2):
            raise ValueError(f"alpha must lie in ({MIN_ALPHA}, pi/2), got {self.alpha}")
        if not self.lam > 0:
            raise ValueError("cone scale must be positive")

    @property
    def n(self) -> int:
        return self.center.size

    @property
    def inner_radius(self) -> float:
        return 1.0 / self.lam

    @property
    def angular_radius(self) -> float:
        """Round distance from ``o`` to the inner rim."""
        return 2.0 * math.atan(self.lam)

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        """Chart membership predicate for sphere points ``(N, n+1)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        o = basepoint(self.n)
        at_o = round_distance(pts, o) <= 1e-12
        out = at_o.copy()
        rest = ~at_o
        if np.any(rest):
            x = chart(pts[rest])
            r = np.linalg.norm(x, axis=1)
            ang = round_distance(x / r[:, None], self.center)
            out[rest] = (r >= self.inner_radius * (1 - tol)) & (ang <= self.alpha + tol)
        return out


def sample_radius_profile(p: ParabolicElement, center, alpha: float, rho_a: float, rho_b: float = math.inf) -> float:
    """Exact ``min |p(rho w)|`` over ``rho in [rho_a, rho_b]`` and ``w`` in the cap."""
    b = p.A.T @ p.v
    mu = float(np.linalg.norm(b))
    lam = p.lam
    if mu == 0.0:
        return lam * rho_a
    theta = float(round_distance(np.asarray(center, dtype=float), b / mu))
    c = math.cos(min(math.pi, theta + alpha))
    rho_star = -mu * c / lam
    rho = min(max(rho_star, rho_a), rho_b)
    val = lam * lam * rho * rho + 2 * lam * rho * mu * c + mu * mu
    return math.sqrt(max(val, 0.0))


def predicted_sup_distance(p: ParabolicElement, cone: Cone) -> float:
    """Exact sup of the round distance to ``o`` over ``p . cone``."""
    R = sample_radius_profile(p, cone.center, cone.alpha, cone.inner_radius)
    if R == 0:
        return math.pi
    return 2.0 * math.atan(1.0 / R)


_LADDER = 2.0 ** 0.25


def _quantize_down(x: float) -> float:
    k = math.floor(math.log(x) / math.log(_LADDER))
    return _LADDER ** k


def _pushforward_rings(cone: Cone, p: ParabolicElement, resolution: float):
    """Chart radii and cap spacings so that ``p`` maps the sample to a ``resolution``-net."""
    r = resolution
    lam_p = p.lam
    far = 1.0 / math.tan(r / 2.0)
    rho = cone.inner_radius
    rings = []
    while True:
        R_tail = sample_radius_profile(p, cone.center, cone.alpha, rho)
        R_loc = sample_radius_profile(p, cone.center, cone.alpha, rho, 2.0 * rho)
        factor = (1.0 + R_loc * R_loc) / (2.0 * lam_p)
        spacing = min(cone.alpha, r * factor / rho, r)
        rings.append((rho, _quantize_down(spacing)))
        if R_tail >= far:
            break
        rho += min(rho, r * factor)
        if len(rings) > MAX_POINTS:
            raise SamplingBudgetError(len(rings), MAX_POINTS)
    return rings


def _cone_points(cone: Cone, p: ParabolicElement, resolution: float, max_points: int) -> np.ndarray:
    rings = _pushforward_rings(cone, p, resolution)
    grids = {}
    total = 1
    m = cone.n - 1
    # rough cap-grid size from the cap volume, checked before any grid is built
    vol = math.pi ** (m / 2) / math.gamma(m / 2 + 1) * cone.alpha ** m
    estimate = 1 + sum(vol / sp ** m for _, sp in rings)
    if estimate > 2 * max_points:
        raise SamplingBudgetError(int(estimate), max_points)
    for _, sp in rings:
        if sp not in grids:
            grids[sp] = cap_grid(cone.center, cone.alpha, sp)
        total += grids[sp].shape[0]
    if total > max_points:
        raise SamplingBudgetError(total, max_points)
    blocks = [basepoint(cone.n)[None, :]]
    for rho, sp in rings:
        blocks.append(chart_inv(rho * grids[sp]))
    return np.vstack(blocks)


def sample_cone(cone: Cone, resolution: float, max_points: int = MAX_POINTS) -> SampledSet:
    """Cover the cone on S^n to ``resolution`` radians; always includes ``o`` and the rim."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    ident = ParabolicElement(1.0, n=cone.n)
    return SampledSet(_cone_points(cone, ident, resolution, max_points), resolution)


def act_on_cone(p: ParabolicElement, cone: Cone, resolution: float, max_points: int = MAX_POINTS) -> SampledSet:
    """Image under ``p`` (applied as a sphere matrix) of a sample of ``cone``.

    The source sample is refined where ``p`` expands, so the image is itself a
    ``resolution``-net of ``p . cone``.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    pts = _cone_points(cone, p, resolution, max_points)
    return SampledSet.normalized(act(parabolic_to_matrix(p), pts), resolution)


# -- sequences ------------------------------------------------------------------

@dataclass(frozen=True)
class SequenceLimits:
    """Limits in ``[0, inf]``; ``u`` and ``A`` may be ``None`` when undefined."""

    lam: float
    mu: float
    ratio: float
    u: np.ndarray | None
    A: np.ndarray


@dataclass(frozen=True, eq=False)
class ParabolicSequence:
    generator: Callable[[int], ParabolicElement]
    schedule: tuple[int, ...] = DEFAULT_SCHEDULE
    limits: SequenceLimits | None = None
    label: str = ""

    def __call__(self, k: int) -> ParabolicElement:
        return self.generator(k)

    def elements(self) -> list[ParabolicElement]:
        return [self.generator(k) for k in self.schedule]


def _rotation(n: int, angle: float, plane=(0, 1)) -> np.ndarray:
    R = np.eye(n)
    i, j = plane
    c, s = math.cos(angle), math.sin(angle)
    R[i, i] = R[j, j] = c
    R[i, j] = -s
    R[j, i] = s
    return R


def homothety_sequence(n: int, rate: float = 1.0, **kw) -> ParabolicSequence:
    """``p_k : x -> k^rate x``."""
    return ParabolicSequence(lambda k: ParabolicElement(float(k) ** rate, n=n), label=f"homothety^{rate}", **kw)


def translation_sequence(direction, rate: float = 1.0, **kw) -> ParabolicSequence:
    """``p_k : x -> x + rate * k * direction``."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return ParabolicSequence(lambda k: ParabolicElement(1.0, v=rate * k * d), label="translation", **kw)


def rotation_sequence(n: int, angle: float, plane=(0, 1), decay: float = 0.0, **kw) -> ParabolicSequence:
    """``A_k`` = rotation by ``angle + decay * 2^-k`` in ``plane``."""
    return ParabolicSequence(
        lambda k: ParabolicElement(1.0, _rotation(n, angle + decay * 2.0 ** (-k), plane), np.zeros(n)),
        label="rotation", **kw)


def product_sequence(*seqs: ParabolicSequence, **kw) -> ParabolicSequence:
    """Pointwise product ``p_k = s1_k @ s2_k @ ...`` (rightmost acts first)."""
    def gen(k):
        out = seqs[0](k)
        for s in seqs[1:]:
            out = out @ s(k)
        return out
    return ParabolicSequence(gen, label="*".join(s.label for s in seqs), **kw)


def _scalar_limit(vals: np.ndarray, name: str) -> float:
    tail = vals[-4:]
    if np.all(np.abs(tail) < 1e-12):
        return 0.0
    last = tail[-1]
    if np.max(np.abs(tail - last)) <= STABILIZATION_RTOL * abs(last):
        return float(last)
    inc = np.all(np.diff(tail) > 0)
    dec = np.all(np.diff(tail) < 0)
    if inc and last >= LIMIT_INF_THRESHOLD:
        return math.inf
    if dec and last <= 1.0 / LIMIT_INF_THRESHOLD:
        return 0.0
    raise NonStabilizingError(f"{name}_k does not stabilize on the schedule tail {tail.tolist()}")


def _vector_limit(vecs: np.ndarray, name: str) -> np.ndarray:
    tail = vecs[-4:]
    if np.max(np.abs(tail - tail[-1])) > STABILIZATION_RTOL * max(1.0, np.max(np.abs(tail[-1]))):
        raise NonStabilizingError(f"{name}_k does not stabilize on the schedule tail")
    return tail[-1].copy()


def estimate_limits(seq: ParabolicSequence) -> SequenceLimits:
    """Tail-stabilization estimate of the limits of ``lam_k, mu_k, lam_k/mu_k, u_k, A_k``.

    A scalar tail is a finite limit when the last four samples agree to
    ``STABILIZATION_RTOL``; it tends to infinity (zero) when strictly
    increasing (decreasing) past ``LIMIT_INF_THRESHOLD`` (its inverse).
    """
    if seq.limits is not None:
        return seq.limits
    if len(seq.schedule) < 4:
        raise NonStabilizingError("need at least 4 schedule samples")
    els = seq.elements()
    lam = np.array([p.lam for p in els])
    mu = np.array([p.mu for p in els])
    lam_inf = _scalar_limit(lam, "lambda")
    mu_inf = _scalar_limit(mu, "mu")
    with np.errstate(divide="ignore"):
        ratio = np.where(mu > 0, lam / np.where(mu > 0, mu, 1.0), np.inf)
    if np.all(np.isinf(ratio[-4:])):
        ratio_inf = math.inf
    else:
        ratio_inf = _scalar_limit(ratio, "lambda/mu")
    u = None
    if np.all(mu[-4:] > 0):
        u = _vector_limit(np.array([p.v / p.mu for p in els]), "u")
    A = _vector_limit(np.array([p.A for p in els]), "A")
    return SequenceLimits(lam_inf, mu_inf, ratio_inf, u, A)


def check_divergence(seq: ParabolicSequence) -> list[float]:
    norms = [float(np.max(np.abs(parabolic_to_matrix(p).mat))) for p in seq.elements()]
    if not (norms[-1] >= DIVERGENCE_THRESHOLD and norms[-1] > norms[0]):
        raise NonDivergentError(f"sequence norms do not diverge (last {norms[-1]:.3g})")
    return norms


# -- classification ------------------------------------------------------------------

class CaseTag(str, enum.Enum):
    SHRINK_TO_VERTEX = "ShrinkToVertex"
    RENORMALIZABLE = "Renormalizable"


@dataclass(frozen=True, eq=False)
class Renormalization:
    translations: tuple[np.ndarray, ...]  # l_k = translation by these vectors
    eps: tuple[float, ...]
    limit: Cone


@dataclass(frozen=True, eq=False)
class ConeLimitVerdict:
    case_tag: CaseTag
    branch: str
    subball: Cone | None = None
    renorm: Renormalization | None = None
    limits: SequenceLimits | None = None
    alpha0: float | None = None

    def __post_init__(self):
        if (self.subball is None) == (self.renorm is None):
            raise ValueError("exactly one of subball / renorm must be set")


def _unit_perp(c: np.ndarray) -> np.ndarray:
    for e in np.eye(c.size):
        w = e - (e @ c) * c
        if np.linalg.norm(w) > 1e-6:
            return w / np.linalg.norm(w)
    raise ValueError("no perpendicular direction")


def avoiding_subcap(center: np.ndarray, alpha: float, avoid: np.ndarray, margin: float) -> tuple[np.ndarray, float]:
    """Largest cap inside ``(center, alpha)`` at distance >= ``margin`` from ``avoid``.

    The subcap is pushed to the far side of the input cap along the great circle
    through ``avoid``; raises :class:`MarginError` when its radius would fall
    below ``min(alpha, margin) / 2``.
    """
    theta = float(round_distance(center, avoid))
    if theta >= alpha + margin:
        return center.copy(), alpha
    new_alpha = 0.5 * (theta + alpha - margin)
    if new_alpha < 0.5 * min(alpha, margin):
        raise MarginError(
            f"cap of radius {alpha:.3g} at distance {theta:.3g} from the excluded direction "
            f"cannot keep margin {margin:.3g}; use a smaller margin")
    # unit tangent at center pointing away from `avoid`
    t = center * math.cos(theta) - avoid
    if np.linalg.norm(t) < 1e-12:
        t = _unit_perp(center)
    else:
        t = t / np.linalg.norm(t)
    shift = alpha - new_alpha
    c2 = math.cos(shift) * center + math.sin(shift) * t
    return c2 / np.linalg.norm(c2), new_alpha


def solve_alpha0(cone: Cone, sub_center: np.ndarray, sub_alpha: float, u: np.ndarray, b: float, margin: float) -> float:
    """Smallest ``alpha0 > 1/lam`` past which ``(b a x + u)/|.|`` stays ``margin/2`` away from ``-u``.

    Checked on a cap grid of the subball over a log grid of ``a >= alpha0``; the
    threshold is located by bisection in ``log(alpha0)``.
    """
    xs = cap_grid(sub_center, sub_alpha, min(0.05, sub_alpha))

    def ok(a0: float) -> bool:
        for a in a0 * np.logspace(0, 8, 33):
            if math.isinf(b):
                w = xs
            else:
                w = b * a * xs + u
            norms = np.linalg.norm(w, axis=1)
            if np.any(norms == 0):
                return False
            ang = round_distance(w / norms[:, None], -u)
            if np.min(ang) < margin / 2:
                return False
        return True

    lo = cone.inner_radius * (1.0 + 1e-9)
    if ok(lo):
        return lo
    hi = lo * 2.0
    while not ok(hi):
        hi *= 2.0
        if hi > 1e12 * lo:
            raise MarginError("no finite alpha0 satisfies the avoidance inequality")
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def classify_sequence(seq: ParabolicSequence, cone: Cone, margin: float = DEFAULT_MARGIN) -> ConeLimitVerdict:
    """Case analysis for ``p_k . C(B, lam)`` with ``p_k -> infinity`` in P.

    After replacing ``p_k`` by ``A_k^{-1} p_k`` (so ``p_k = lam_k Id + mu_k u_k``):

    * ``mu_k -> a < inf``, ``lam_k -> inf``: the whole cone is crushed onto ``o``.
    * ``mu_k -> a < inf``, ``lam_k -> 0``: ``l_k`` = translation by ``-mu_k u_k``
      makes ``l_k p_k`` a homothety-rotation and ``l_k p_k C(B, lam_k) -> C(A B, 1)``.
    * ``mu_k -> inf``: a closed subcap avoiding ``-u`` (by ``margin``) at scale
      ``1/(2 alpha0)`` is crushed onto ``o``.
    """
    check_divergence(seq)
    lim = estimate_limits(seq)
    if math.isinf(lim.mu):
        if lim.u is None:
            raise NonStabilizingError("u_k has no limit")
        u = lim.A.T @ lim.u
        c2, a2 = avoiding_subcap(cone.center, cone.alpha, -u, margin)
        alpha0 = solve_alpha0(cone, c2, a2, u, lim.ratio, margin)
        sub = Cone(c2, a2, 1.0 / (2.0 * alpha0))
        return ConeLimitVerdict(CaseTag.SHRINK_TO_VERTEX, "mu->inf", subball=sub, limits=lim, alpha0=alpha0)
    if math.isinf(lim.lam):
        return ConeLimitVerdict(CaseTag.SHRINK_TO_VERTEX, "mu bounded, lambda->inf",
                                subball=Cone(cone.center, cone.alpha, cone.lam), limits=lim)
    if lim.lam == 0.0:
        els = seq.elements()
        limit = Cone(lim.A @ cone.center, cone.alpha, 1.0)
        renorm = Renormalization(tuple(-p.v for p in els), tuple(p.lam for p in els), limit)
        return ConeLimitVerdict(CaseTag.RENORMALIZABLE, "mu bounded, lambda->0", renorm=renorm, limits=lim)
    raise NonDivergentError("mu_k and lambda_k both have finite nonzero limits: the sequence is bounded in P")


# -- brute-force verification ---------------------------------------------------------

@dataclass
class VerificationReport:
    case_tag: CaseTag
    schedule: list[int]
    residuals: list[float]
    predicted: list[float]
    tolerance: float
    passed: bool
    failures: list[str] = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1]

    def to_dict(self) -> dict:
        return {
            "case": self.case_tag.value,
            "schedule": self.schedule,
            "residuals": self.residuals,
            "predicted": self.predicted,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "failures": self.failures,
        }


def verify_verdict(seq: ParabolicSequence, cone: Cone, verdict: ConeLimitVerdict, K: int | None = None,
                   resolution: float = 0.01) -> VerificationReport:
    """Brute-force Hausdorff check of a verdict along the schedule up to index ``K``."""
    sched = [k for k in seq.schedule if K is None or k <= K]
    if not sched:
        raise ValueError("empty schedule")
    residuals, predicted, failures = [], [], []
    slack = 2.0 * resolution
    if verdict.case_tag is CaseTag.SHRINK_TO_VERTEX:
        sub = verdict.subball
        o = basepoint(cone.n)
        for k in sched:
            p = seq(k)
            img = act_on_cone(p, sub, resolution)
            residuals.append(sup_distance_to(img, o))
            predicted.append(predicted_sup_distance(p, sub))
        # the image may first sweep away from o; monotone decay is required
        # from the last index where the exact sup still increases
        start = max([0] + [j for j in range(1, len(predicted)) if predicted[j] > predicted[j - 1]])
        for j in range(start + 1, len(residuals)):
            if residuals[j] > residuals[j - 1] + slack:
                failures.append(f"residual increases at k={sched[j]}: {residuals[j - 1]:.4g} -> {residuals[j]:.4g}")
        for k, r, pr in zip(sched, residuals, predicted):
            if r > pr + 1e-7:
                failures.append(f"sampled sup {r:.6g} exceeds the exact sup {pr:.6g} at k={k}")
    else:
        ren = verdict.renorm
        limit_sample = sample_cone(ren.limit, resolution)
        lim_A = verdict.limits.A
        eps_of = dict(zip(seq.schedule, ren.eps))
        tr_of = dict(zip(seq.schedule, ren.translations))
        for k in sched:
            p = seq(k)
            l_k = ParabolicElement(1.0, v=tr_of[k])
            q = l_k @ p
            ck = Cone(cone.center, cone.alpha, eps_of[k])
            img = act_on_cone(q, ck, resolution)
            residuals.append(hausdorff(img, limit_sample))
            chord = float(np.linalg.norm(p.A - lim_A, 2))
            predicted.append(2.0 * math.asin(min(1.0, chord / 2.0)))
    tol = predicted[-1] + slack
    if residuals[-1] >= tol:
        failures.append(f"final residual {residuals[-1]:.4g} >= tolerance {tol:.4g}")
    return VerificationReport(verdict.case_tag, sched, residuals, predicted, tol, not failures, failures)


# -- half-lines --------------------------------------------------------------------

@dataclass(frozen=True)
class HalflineVerdict:
    verdict: str  # "ConvergesToVertex" | "Inconclusive"
    angle: float
    sup_distance: float


def halfline_points(x, u, n_lin: int = 20001) -> np.ndarray:
    """Sphere sample of the half-line ``[x, u) = {x - s u : s >= 0}``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    span = 4.0 * np.linalg.norm(x) + 10.0
    s = np.concatenate([np.linspace(0.0, span, n_lin), span * np.logspace(0, 12, 400)[1:]])
    return chart_inv(x[None, :] - s[:, None] * u[None, :])


def halfline_limit(xs: Sequence, us: Sequence, delta: float = DEFAULT_MARGIN) -> HalflineVerdict:
    """Decide whether the half-lines ``[x_k, u_k)`` converge to ``o``.

    ``[x, u)`` is issued from ``x`` and runs along ``-u``; the sequence
    converges to ``o`` when ``x_k -> inf`` with ``x_k/|x_k| -> v`` and
    ``u_k -> u`` with ``v != u``.  Equal limit directions are inconclusive.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    us = np.atleast_2d(np.asarray(us, dtype=float))
    norms = np.linalg.norm(xs, axis=1)
    if not (np.all(np.diff(norms[-4:]) > 0) and norms[-1] >= LIMIT_INF_THRESHOLD):
        raise NonDivergentError("x_k does not tend to infinity along the schedule")
    v = xs[-1] / norms[-1]
    u = us[-1] / np.linalg.norm(us[-1])
    ang = float(round_distance(v, u))
    pts = halfline_points(xs[-1], us[-1])
    sup = float(np.max(round_distance(pts, basepoint(xs.shape[1]))))
    return HalflineVerdict("ConvergesToVertex" if ang > delta else "Inconclusive", ang, sup)
