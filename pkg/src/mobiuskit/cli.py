"""Scenario runner: ``mobiuskit run --config cfg.json --out-dir out/``.

Exit codes: 0 when every scenario assertion holds, 1 on assertion failures,
2 on configuration errors.  The JSON report is deterministic given the config
and seed, apart from its ``wall_clock_s`` field.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import __version__
from .kernels import BACKEND
from .sphere import SampledSet, _atomic_write_text, _rows_to_csv, chart_rows, write_csv

REPORT_NAME = "report.json"


class ConfigError(ValueError):
    pass


# -- schema -------------------------------------------------------------------------------

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_MAT = {"type": "array", "items": _VEC, "minItems": 1}

_SEQ = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "kind": {"enum": ["homothety", "translation", "rotation", "product", "boost", "matrices"]},
        "rate": _NUM,
        "direction": _VEC,
        "angle": _NUM,
        "plane": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "decay": _NUM,
        "factors": {"type": "array", "items": {"$ref": "#/definitions/seq"}, "minItems": 1},
        "alternate": {"type": "boolean"},
        "elements": {"type": "array", "items": {
            "type": "object",
            "properties": {"k": {"type": "integer"}, "lambda": _NUM, "A": _MAT, "v": _VEC},
            "required": ["k", "lambda"], "additionalProperties": False}},
        "expect": {"type": "string"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_GROUP = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["schottky", "translation", "rotation", "trivial", "matrices", "loxodromic"]},
        "t": _NUM,
        "angle": _NUM,
        "plane": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "generators": {"type": "array", "items": _MAT},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_PARAMS = {
    "cone-dynamics": {
        "properties": {
            "cone": {"type": "object", "properties": {"center": _VEC, "alpha": _NUM, "lambda": _NUM},
                     "required": ["center", "alpha", "lambda"], "additionalProperties": False},
            "sequences": {"type": "array", "items": {"$ref": "#/definitions/seq"}, "minItems": 1},
            "resolution": _NUM, "tolerance": _NUM, "margin": _NUM,
        },
        "required": ["cone", "sequences"],
    },
    "limit-set": {
        "properties": {"group": _GROUP, "depth": {"type": "integer", "minimum": 0},
                       "methods": {"type": "array", "items": {"enum": ["OrbitAccumulation", "LoxodromicFixedPoints"]}},
                       "epsilon": _NUM},
        "required": ["group", "depth"],
    },
    "maximality": {
        "properties": {"cases": {"type": "array", "minItems": 1, "items": {
            "type": "object",
            "properties": {"name": {"type": "string"},
                           "omega": {"enum": ["hemisphere", "sphere-minus-point", "sphere-minus-sphere"]},
                           "n": {"type": "integer", "minimum": 1}, "m": {"type": "integer", "minimum": 1},
                           "group": _GROUP, "epsilon": _NUM, "depth": {"type": "integer", "minimum": 0},
                           "expect": {"enum": ["Maximal", "MaximalAtResolution", "NotMaximal"]},
                           "min_gap": {"oneOf": [_NUM, {"const": "schottky-separation"}]}},
            "required": ["omega", "group", "expect"], "additionalProperties": False}}},
        "required": ["cases"],
    },
    "simple-divergence": {
        "properties": {"sequences": {"type": "array", "minItems": 1, "items": {
            "type": "object",
            "properties": {"name": {"type": "string"}, "rate": _NUM,
                           "rotation": {"type": "object", "properties": {
                               "plane": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                               "angle": _NUM}, "required": ["plane", "angle"], "additionalProperties": False},
                           "alternate": {"type": "boolean"},
                           "expect": {"enum": ["simple", "not-simple"]}},
            "required": ["expect"], "additionalProperties": False}}},
        "required": ["sequences"],
    },
    "cauchy-probe": {
        "properties": {"fixture": {"enum": ["sphere-minus-point", "sphere-minus-two-points"]},
                       "pairs": {"type": "integer", "minimum": 1}, "cross_pairs": {"type": "integer", "minimum": 0},
                       "threshold": _NUM},
        "required": ["fixture", "pairs"],
    },
    "normal-domain": {
        "properties": {"cases": {"type": "array", "minItems": 1, "items": {
            "type": "object",
            "properties": {"name": {"type": "string"},
                           "kind": {"enum": ["half-space", "cone-graph", "point-deleted", "fibered"]},
                           "k": _NUM, "h": _NUM, "pairs": {"type": "integer", "minimum": 0},
                           "dim": {"type": "integer", "minimum": 2},
                           "fixed_pairs": {"type": "array", "items": {"type": "array", "items": _VEC,
                                                                       "minItems": 2, "maxItems": 2}},
                           "expect_range": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
            "required": ["kind", "h"], "additionalProperties": False}}},
        "required": ["cases"],
    },
    "jacobian-check": {
        "properties": {"samples": {"type": "integer", "minimum": 1}, "tolerance": _NUM,
                       "dimensions": {"type": "array", "items": {"type": "integer", "minimum": 1}}},
        "required": ["samples"],
    },
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "definitions": {"seq": _SEQ},
    "type": "object",
    "properties": {
        "schema": {"const": 1},
        "scenario": {"enum": sorted(_PARAMS)},
        "n": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "params": {"type": "object"},
    },
    "required": ["schema", "scenario", "n", "params"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"scenario": {"const": name}}},
         "then": {"properties": {"params": {**body, "type": "object", "additionalProperties": False}}}}
        for name, body in _PARAMS.items()
    ],
}


def load_config(path: Path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {where}: {exc.message}") from exc
    return cfg


# -- helpers --------------------------------------------------------------------------------

def _clean(obj: Any) -> Any:
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def emit_plot_data(X: SampledSet, path) -> list[Path]:
    """Write ``path`` (unit vectors) and ``path`` with suffix ``.chart.csv`` (stereographic chart)."""
    path = Path(path)
    out = [write_csv(X, path)]
    chart_path = path.with_suffix(".chart.csv")
    rows = chart_rows(X)
    header = [f"x{i}" for i in range(rows.shape[1])]
    try:
        _atomic_write_text(chart_path, _rows_to_csv(header, rows))
    except OSError as exc:
        raise OSError(f"cannot write chart projection to {chart_path}: {exc}") from exc
    out.append(chart_path)
    return out


class Context:
    def __init__(self, cfg: dict, out_dir: Path, seed: int, tol_scale: float, max_exp: int | None):
        self.cfg = cfg
        self.n = cfg["n"]
        self.params = cfg["params"]
        self.out_dir = out_dir
        self.seed = seed
        self.tol_scale = tol_scale
        self.max_exp = 12 if max_exp is None else max_exp
        self.rng = np.random.default_rng(seed)
        self.failures: list[dict] = []
        self.artifacts: list[str] = []
        self.tolerances: dict[str, float] = {}

    def tol(self, name: str, value: float) -> float:
        v = value * self.tol_scale
        self.tolerances[name] = v
        return v

    def fail(self, where: str, message: str, **data) -> None:
        self.failures.append(_clean({"where": where, "message": message, **data}))

    def emit(self, X: SampledSet, name: str) -> None:
        for p in emit_plot_data(X, self.out_dir / f"{name}.csv"):
            self.artifacts.append(p.name)


def _vec(v, n: int) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (n,):
        raise ConfigError(f"expected a vector of length {n}, got {list(a.shape)}")
    return a


# -- scenarios -----------------------------------------------------------------------------

def _build_sequence(spec: dict, n: int, schedule: tuple[int, ...]):
    from . import cones
    from .liegroup import ParabolicElement

    kind = spec["kind"]
    if kind == "homothety":
        return cones.homothety_sequence(n, spec.get("rate", 1.0), schedule=schedule)
    if kind == "translation":
        d = _vec(spec.get("direction", np.eye(n)[0]), n)
        return cones.translation_sequence(d, spec.get("rate", 1.0), schedule=schedule)
    if kind == "rotation":
        plane = tuple(spec.get("plane", (0, 1)))
        if max(plane) >= n or plane[0] == plane[1]:
            raise ConfigError(f"rotation plane {list(plane)} invalid for n={n}")
        return cones.rotation_sequence(n, spec.get("angle", 0.0), plane, spec.get("decay", 0.0), schedule=schedule)
    if kind == "product":
        parts = [_build_sequence(f, n, schedule) for f in spec.get("factors", [])]
        if not parts:
            raise ConfigError("product sequence needs factors")
        return cones.product_sequence(*parts, schedule=schedule)
    if kind == "matrices":
        table = {}
        for el in spec.get("elements", []):
            A = np.asarray(el["A"], dtype=float) if "A" in el else None
            v = _vec(el["v"], n) if "v" in el else None
            table[el["k"]] = ParabolicElement(el["lambda"], A, v, n=n)
        if not table:
            raise ConfigError("matrices sequence needs elements")
        ks = tuple(sorted(table))
        return cones.ParabolicSequence(lambda k: table[k], schedule=ks, label="matrices")
    raise ConfigError(f"sequence kind {kind!r} is not valid for cone dynamics")


def scenario_cone_dynamics(ctx: Context) -> dict:
    from . import cones
    from .sphere import DEFAULT_RESOLUTION

    p = ctx.params
    c = p["cone"]
    try:
        cone = cones.Cone(_vec(c["center"], ctx.n), c["alpha"], c["lambda"])
    except ValueError as exc:
        raise ConfigError(f"cone: {exc}") from exc
    res = p.get("resolution", DEFAULT_RESOLUTION)
    tol = ctx.tol("cone_residual", p.get("tolerance", 0.05))
    margin = p.get("margin", cones.DEFAULT_MARGIN)
    schedule = tuple(2 ** j for j in range(ctx.max_exp + 1))
    out = []
    for i, spec in enumerate(p["sequences"]):
        name = spec.get("name", f"seq{i}")
        seq = _build_sequence(spec, ctx.n, schedule)
        entry = {"name": name, "schedule": list(seq.schedule), "resolution": res}
        try:
            verdict = cones.classify_sequence(seq, cone, margin)
        except (cones.NonDivergentError, cones.NonStabilizingError, cones.MarginError) as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
            ctx.fail(name, entry["error"])
            out.append(entry)
            continue
        rep = cones.verify_verdict(seq, cone, verdict, resolution=res)
        entry["case"] = verdict.case_tag.value
        entry["branch"] = verdict.branch
        if verdict.subball is not None:
            sb = verdict.subball
            entry["subball"] = {"center": sb.center, "alpha": sb.alpha, "lambda": sb.lam, "alpha0": verdict.alpha0}
        else:
            rn = verdict.renorm
            entry["renorm"] = {"eps": list(rn.eps), "l_translations": [list(t) for t in rn.translations],
                               "limit": {"center": rn.limit.center, "alpha": rn.limit.alpha, "lambda": rn.limit.lam}}
        entry["verification"] = rep.to_dict()
        if not rep.passed:
            ctx.fail(name, "brute-force verification failed", details=rep.failures)
        if rep.final_residual >= tol:
            ctx.fail(name, f"final residual {rep.final_residual:.6g} >= tolerance {tol:g}")
        if "expect" in spec and spec["expect"] != verdict.case_tag.value:
            ctx.fail(name, f"expected {spec['expect']}, got {verdict.case_tag.value}")
        K = seq.schedule[-1]
        if verdict.subball is not None:
            img = cones.act_on_cone(seq(K), verdict.subball, res)
        else:
            from .liegroup import ParabolicElement
            q = ParabolicElement(1.0, v=verdict.renorm.translations[-1]) @ seq(K)
            img = cones.act_on_cone(q, cones.Cone(cone.center, cone.alpha, verdict.renorm.eps[-1]), res)
        ctx.emit(img, f"cone_{name}")
        out.append(entry)
    return {"sequences": out, "qualifier": f"schedule k=2^0..2^{ctx.max_exp}, resolution {res:g} rad"}


def _build_group(spec: dict, n: int):
    from . import kleinian
    from .liegroup import GroupElement, boost

    kind = spec["kind"]
    if kind == "schottky":
        return kleinian.schottky_group(spec.get("t", 2.5), n)
    if kind == "translation":
        return kleinian.translation_group(n)
    if kind == "loxodromic":
        return kleinian.GroupPresentation((boost(spec.get("t", 2.0), n),))
    if kind == "rotation":
        i, j = spec.get("plane", (n - 1, n))
        return kleinian.GroupPresentation((kleinian.plane_rotation(n, i, j, spec.get("angle", 2 * math.pi / 5)),))
    if kind == "trivial":
        return kleinian.GroupPresentation.trivial(n)
    if kind == "matrices":
        try:
            gens = tuple(GroupElement(np.asarray(m, dtype=float)) for m in spec.get("generators", []))
        except ValueError as exc:
            raise ConfigError(f"group generators: {exc}") from exc
        return kleinian.GroupPresentation(gens) if gens else kleinian.GroupPresentation.trivial(n)
    raise ConfigError(f"unknown group kind {kind!r}")


def scenario_limit_set(ctx: Context) -> dict:
    from . import kleinian
    from .sphere import hausdorff

    p = ctx.params
    G = _build_group(p["group"], ctx.n)
    depth = p["depth"]
    methods = p.get("methods", ["OrbitAccumulation", "LoxodromicFixedPoints"])
    sets = {}
    out = {"depth": depth, "methods": {}}
    for m in methods:
        L = kleinian.limit_set(G, depth, m)
        sets[m] = L
        info = {"points": len(L), "covering_radius": L.covering_radius(), "notes": list(L.warnings)}
        if "epsilon" in p:
            rep = kleinian.density_report(L, p["epsilon"])
            info["density"] = {"verdict": rep.verdict, "gap": rep.gap, "grid_points": rep.grid_size}
        out["methods"][m] = info
        if not L.empty:
            ctx.emit(L.sampled(), f"limit_{m}")
    if len(sets) == 2 and all(not s.empty for s in sets.values()):
        a, b = sets.values()
        dist = hausdorff(a.sampled(), b.sampled())
        bound = ctx.tol("method_agreement_factor", 3.0) * max(a.covering_radius(), b.covering_radius())
        out["method_hausdorff"] = dist
        out["agreement_bound"] = bound
        if dist > bound:
            ctx.fail("limit-set", f"methods disagree: hausdorff {dist:.3g} > {bound:.3g}")
    out["qualifier"] = f"word length <= {depth}"
    return out


def scenario_maximality(ctx: Context) -> dict:
    from . import kleinian

    cases = []
    for i, c in enumerate(ctx.params["cases"]):
        name = c.get("name", f"case{i}")
        n = c.get("n", ctx.n)
        try:
            omega = kleinian.OmegaFixture(c["omega"], n, c.get("m", 0))
        except kleinian.FixtureError as exc:
            raise ConfigError(f"{name}: {exc}") from exc
        G = _build_group(c["group"], n)
        v = kleinian.maximality_verdict(G, omega, c.get("epsilon", 0.05), c.get("depth", 8))
        entry = {"name": name, "verdict": v.verdict, "caveat": v.caveat, "gap": v.gap,
                 "gap_center": v.gap_center, "details": v.details}
        if v.verdict != c["expect"]:
            ctx.fail(name, f"expected {c['expect']}, got {v.verdict}")
        if "min_gap" in c:
            mg = c["min_gap"]
            if mg == "schottky-separation":
                mg = kleinian.schottky_separation(c["group"].get("t", 2.5))
            entry["min_gap"] = mg
            if v.gap is None or v.gap < mg:
                ctx.fail(name, f"gap witness {v.gap} below the required {mg:.6g}")
        cases.append(entry)
    return {"cases": cases}


def scenario_simple_divergence(ctx: Context) -> dict:
    from . import kleinian
    from .liegroup import boost

    out = []
    n = ctx.n
    js = list(range(1, ctx.max_exp + 2))
    tol = ctx.tol("k_factor_match", 1e-8)
    for i, s in enumerate(ctx.params["sequences"]):
        name = s.get("name", f"seq{i}")
        rate = s.get("rate", 1.0)
        r = None
        if "rotation" in s:
            a, b = s["rotation"]["plane"]
            r = kleinian.plane_rotation(n, a, b, s["rotation"]["angle"])
        terms = []
        for j in js:
            g = boost(rate * j, n)
            if r is not None and (not s.get("alternate", False) or j % 2 == 1):
                g = r @ g
            terms.append(g)
        sd = kleinian.simple_divergence(terms)
        entry = {"name": name, "simple": sd.simple, "t": sd.t, "reason": sd.reason,
                 "max_reconstruction_residual": max(sd.reconstruction_residuals)}
        if max(sd.reconstruction_residuals) >= 1e-9:
            ctx.fail(name, "KAK reconstruction residual above 1e-9")
        if sd.simple:
            entry.update(l1=sd.l1, l2=sd.l2, p_plus=sd.p_plus, p_minus=sd.p_minus)
            # a rotation fixing the boost axis commutes with a(t) and lands in k2
            I = np.eye(n + 2)
            moves_axis = r is not None and not np.allclose(r.mat[:, n + 1], I[:, n + 1])
            expected_l1 = r.mat if moves_axis else I
            expected_l2 = I if (r is None or moves_axis) else r.mat
            err = max(float(np.max(np.abs(sd.l1 - expected_l1))), float(np.max(np.abs(sd.l2 - expected_l2))))
            entry["k_factor_error"] = err
            if err >= tol:
                ctx.fail(name, f"K-factor limits differ from the prediction by {err:.3g}")
        want = s["expect"] == "simple"
        if sd.simple != want:
            ctx.fail(name, f"expected {s['expect']}")
        out.append(entry)
    return {"sequences": out, "qualifier": f"KAK lengths t = rate * j, j = 1..{js[-1]}"}


def _random_tail(ctx: Context, fiber: int):
    from .cartan_metric import TailSpec, random_parabolic

    p0 = random_parabolic(ctx.n, ctx.rng)
    Y = ctx.rng.normal(size=ctx.n)
    return TailSpec(fiber, p0, Y / np.linalg.norm(Y))


def scenario_cauchy_probe(ctx: Context) -> dict:
    from . import cartan_metric as cm

    p = ctx.params
    fx = cm.CauchyFixture(p["fixture"], ctx.n)
    gate = cm.normality_gate(fx)
    thr = ctx.tol("cauchy_threshold", p.get("threshold", 1e-3))
    coset_tol = ctx.tol("coset_residual", 1e-8)
    rows = []
    for i in range(p["pairs"]):
        t1, t2 = _random_tail(ctx, 0), _random_tail(ctx, 0)
        r = cm.cauchy_probe(fx, t1, t2, thr, coset_tol)
        rows.append({"pair": i, "kind": "same-fiber", "verdict": r.verdict, "coset_residual": r.coset_residual,
                     "final_distance": r.distances[-1] if r.distances else None})
        if r.verdict != "Equivalent":
            ctx.fail(f"pair{i}", "same-fiber tails reported Inequivalent", residual=r.coset_residual)
    if fx.kind == "sphere-minus-two-points":
        for i in range(p.get("cross_pairs", p["pairs"])):
            t1, t2 = _random_tail(ctx, 0), _random_tail(ctx, 1)
            r = cm.cauchy_probe(fx, t1, t2, thr, coset_tol)
            rows.append({"pair": i, "kind": "cross-fiber", "verdict": r.verdict, "coset_residual": r.coset_residual})
            if r.verdict != "Inequivalent":
                ctx.fail(f"cross{i}", "cross-fiber tails reported Equivalent")
    return {"normality_gate": gate.__dict__, "pairs": rows,
            "qualifier": "distances are upper bounds from one-parameter chords"}


def scenario_normal_domain(ctx: Context) -> dict:
    from . import normal_domains as nd

    out = []
    for i, c in enumerate(ctx.params["cases"]):
        name = c.get("name", f"case{i}")
        h = c["h"]
        kind = c["kind"]
        k = c.get("k", 1.0)
        count = c.get("pairs", 100)
        fixed = [(np.asarray(a, dtype=float), np.asarray(b, dtype=float)) for a, b in c.get("fixed_pairs", [])]
        entry = {"name": name, "kind": kind, "h": h}
        if kind in ("half-space", "cone-graph"):
            dom = nd.half_space(2) if kind == "half-space" else nd.cone_graph(k)
            est = nd.GridPathEstimator(dom, h)
            pairs = fixed + nd.random_pairs(dom, count, ctx.rng, 0.05)
            rep = nd.bilipschitz_report(dom, pairs, h, estimator=est)
            entry.update(worst_ratio=rep.worst_ratio, bound=rep.bound, eta_at_worst=rep.eta_at_worst,
                         passed=rep.passed, unreachable=rep.unreachable)
            rows = rep.rows
            if "expect_range" in c and fixed:
                lo, hi = c["expect_range"]
                val = rows[0][2]
                entry["first_fixed_pair_distance"] = val
                if not lo <= val <= hi:
                    ctx.fail(name, f"fixed pair distance {val:.6g} outside [{lo}, {hi}]")
        elif kind == "point-deleted":
            d = c.get("dim", 3)
            dom = nd.SmallBoundaryDomain(np.tile([-1.0, 1.0], (d, 1)), points=np.zeros((1, d)))
            est = nd.GridPathEstimator(dom, h)
            pairs = fixed + nd.random_pairs(dom, count, ctx.rng, 0.1)
            rep = nd.bilipschitz_report(dom, pairs, h, estimator=est)
            entry.update(worst_ratio=rep.worst_ratio, bound=rep.bound, eta_at_worst=rep.eta_at_worst,
                         passed=rep.passed, unreachable=rep.unreachable)
            rows = rep.rows
        else:
            base = nd.cone_graph(k, 1.0)
            base_pairs = nd.random_pairs(base, count, ctx.rng, 0.1)
            pairs = [(np.r_[a, ctx.rng.uniform(0, 1)], np.r_[b, ctx.rng.uniform(0, 1)]) for a, b in base_pairs]
            rep = nd.fibered_constant_check(base, [[0.0, 1.0]], fixed + pairs, h)
            entry.update(worst_ratio=rep.worst_ratio, K=rep.K, k_base=rep.k_base, passed=rep.passed,
                         composite_ok=rep.composite_ok, unreachable=rep.unreachable)
            rows = rep.rows
        entry["pairs"] = len(rows)
        if not entry["passed"]:
            ctx.fail(name, "intrinsic/extrinsic bound violated")
        header = ["x", "y", "intrinsic", "euclidean", "ratio", "eta"]
        lines = [",".join(header)]
        for r in rows:
            lines.append(",".join([" ".join("%.17g" % v for v in r[0]), " ".join("%.17g" % v for v in r[1])]
                                  + ["%.17g" % v for v in r[2:6]]))
        _atomic_write_text(ctx.out_dir / f"ratios_{name}.csv", "\n".join(lines) + "\n")
        ctx.artifacts.append(f"ratios_{name}.csv")
        out.append(entry)
    return {"cases": out, "qualifier": "finite sample of pairs: necessary instances only"}


def scenario_jacobian_check(ctx: Context) -> dict:
    from .cartan_metric import random_parabolic, right_jacobian_check

    p = ctx.params
    tol = ctx.tol("jacobian_residual", p.get("tolerance", 1e-6))
    dims = p.get("dimensions", [ctx.n])
    out = {}
    for n in dims:
        res = [right_jacobian_check(random_parabolic(n, ctx.rng)).residual for _ in range(p["samples"])]
        out[str(n)] = {"samples": len(res), "max_residual": max(res), "mean_residual": float(np.mean(res))}
        if max(res) >= tol:
            ctx.fail(f"n={n}", f"max residual {max(res):.3g} >= {tol:g}")
    return {"dimensions": out}


SCENARIOS = {
    "cone-dynamics": scenario_cone_dynamics,
    "limit-set": scenario_limit_set,
    "maximality": scenario_maximality,
    "simple-divergence": scenario_simple_divergence,
    "cauchy-probe": scenario_cauchy_probe,
    "normal-domain": scenario_normal_domain,
    "jacobian-check": scenario_jacobian_check,
}


# -- entry points -------------------------------------------------------------------------

def _write_report(out_dir: Path, report: dict) -> Path:
    path = out_dir / REPORT_NAME
    _atomic_write_text(path, json.dumps(_clean(report), sort_keys=True, indent=2) + "\n")
    return path


def run(config: Path, out_dir: Path, seed: int | None = None, tolerance_scale: float = 1.0,
        schedule_max_exp: int | None = None) -> int:
    t0 = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = {"tool": "mobiuskit", "version": __version__, "report_schema": 1}
    try:
        cfg = load_config(config)
        if tolerance_scale <= 0:
            raise ConfigError("--tolerance-scale must be positive")
        # limit estimation needs the tail past 1e3, so 2^10 at least
        if schedule_max_exp is not None and not 10 <= schedule_max_exp <= 16:
            raise ConfigError("--schedule-max-exp must lie in [10, 16]")
        the_seed = seed if seed is not None else cfg.get("seed", 0)
        ctx = Context(cfg, out_dir, the_seed, tolerance_scale, schedule_max_exp)
        results = SCENARIOS[cfg["scenario"]](ctx)
    except ConfigError as exc:
        report = {**base, "status": "config-error", "error": str(exc), "passed": False,
                  "wall_clock_s": time.perf_counter() - t0}
        _write_report(out_dir, report)
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    report = {
        **base,
        "scenario": cfg["scenario"],
        "config": cfg,
        "status": "ok" if not ctx.failures else "assertion-failure",
        "passed": not ctx.failures,
        "results": results,
        "failures": ctx.failures,
        "artifacts": sorted(ctx.artifacts),
        "provenance": {"seed": ctx.seed, "tolerance_scale": tolerance_scale, "tolerances": ctx.tolerances,
                       "schedule_max_exp": ctx.max_exp, "kernel_backend": BACKEND,
                       "numpy": np.__version__},
        "wall_clock_s": time.perf_counter() - t0,
    }
    _write_report(out_dir, report)
    if ctx.failures:
        for f in ctx.failures:
            print(f"FAIL {f['where']}: {f['message']}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="mobiuskit", description="Flat-model conformal geometry scenario runner")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario from a JSON config")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--out-dir", required=True, type=Path)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--tolerance-scale", type=float, default=1.0)
    r.add_argument("--schedule-max-exp", type=int, default=None, help="schedule k = 2^0..2^E, E in [10, 16]")
    sub.add_parser("schema", help="print the config JSON schema")
    args = ap.parse_args(argv)
    if args.command == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=2, sort_keys=True))
        return 0
    return run(args.config, args.out_dir, args.seed, args.tolerance_scale, args.schedule_max_exp)


if __name__ == "__main__":
    sys.exit(main())
