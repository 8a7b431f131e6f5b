"""Acceptance criteria 1-10, one verdict line each.

Run under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from mobiuskit import cartan_metric as cm
from mobiuskit import cli, cones, kleinian as kl
from mobiuskit import normal_domains as nd
from mobiuskit.liegroup import (assemble, boost, exp_algebra, kak, kak_residual, random_group_element)
from mobiuskit.sphere import s_plus

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
RESULTS: dict[int, str] = {}
_REPORTS: dict[str, dict] = {}


def _record(num: int, title: str, ok: bool, detail: str, elapsed: float, limit: float | None = None) -> None:
    timing = f"{elapsed:.1f} s" + (f" (limit {limit:g} s)" if limit is not None else "")
    if limit is not None and elapsed >= limit:
        ok = False
    RESULTS[num] = f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}; {timing}"
    print(RESULTS[num])
    assert ok, RESULTS[num]


def _run_config(name: str, out_root: Path) -> tuple[int, dict]:
    out = out_root / name
    code = cli.run(CONFIGS / f"{name}.json", out)
    report = json.loads((out / cli.REPORT_NAME).read_text())
    _REPORTS.setdefault(name, report)
    return code, report


@pytest.fixture(scope="module")
def out_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


def test_criterion_01_ad_jacobian():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = {}
    for n in (2, 3):
        worst[n] = max(cm.right_jacobian_check(cm.random_parabolic(n, rng)).residual for _ in range(100))
    el = time.perf_counter() - t0
    m = max(worst.values())
    _record(1, "Ad-Jacobian identity", m < 1e-6,
            f"max residual {m:.2e} over 2x100 random P-elements (n=2: {worst[2]:.1e}, n=3: {worst[3]:.1e}), "
            "bound 1e-6", el, 10)


def test_criterion_02_cone_dynamics():
    t0 = time.perf_counter()
    cone = cones.Cone(np.array([1.0, 0.3]), 0.5, 1.0)
    family = {
        "homothety up": (cones.homothety_sequence(2, 1.0), "ShrinkToVertex"),
        "homothety down": (cones.homothety_sequence(2, -1.0), "Renormalizable"),
        "translation": (cones.translation_sequence(np.array([-1.0, 0.0])), "ShrinkToVertex"),
        "combined lambda=mu": (cones.product_sequence(cones.translation_sequence(np.array([0.0, 1.0])),
                                                      cones.homothety_sequence(2, 1.0)), "ShrinkToVertex"),
        "rotation, homothety down": (cones.product_sequence(cones.rotation_sequence(2, 0.7, decay=1.0),
                                                            cones.homothety_sequence(2, -1.0)), "Renormalizable"),
        "rotation, translation": (cones.product_sequence(cones.rotation_sequence(2, 0.7),
                                                         cones.translation_sequence(np.array([-1.0, -0.2]))),
                                  "ShrinkToVertex"),
    }
    K = 2 ** 12
    parts, ok = [], True
    for name, (seq, expected) in family.items():
        v = cones.classify_sequence(seq, cone)
        rep = cones.verify_verdict(seq, cone, v, K=K, resolution=0.01)
        good = v.case_tag.value == expected and rep.passed and rep.final_residual < 0.05
        ok &= good
        parts.append(f"{name} {v.case_tag.value} {rep.final_residual:.1e}")
    el = time.perf_counter() - t0
    _record(2, "cone-dynamics verdicts vs brute force", ok,
            f"K=2^12, resolution 0.01 rad, residual bound 0.05 [{'; '.join(parts)}]", el, 120)


def test_criterion_03_s_plus_radius_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    u = rng.normal(size=(1000, 3)) * np.exp(rng.uniform(-5, 5, size=(1000, 1)))
    err = np.max(np.abs(np.linalg.norm(s_plus(u), axis=1) * np.linalg.norm(u, axis=1) - 1.0))
    _record(3, "s+ radius law", err < 1e-10, f"max |(|s+(u)| |u|) - 1| = {err:.1e} on 1000 u, bound 1e-10",
            time.perf_counter() - t0)


def test_criterion_04_nilpotent_exponential():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    cube, expo = 0.0, 0.0
    for _ in range(100):
        X = assemble(plus=rng.normal(size=3), n=3)
        cube = max(cube, float(np.linalg.norm(X @ X @ X)))
        expo = max(expo, float(np.linalg.norm(exp_algebra(X).mat - (np.eye(5) + X + X @ X / 2))))
    ok = cube < 1e-14 and expo < 1e-12
    _record(4, "nilpotent exponential", ok,
            f"max |X^3| = {cube:.1e} (machine zero), max |exp X - (I + X + X^2/2)| = {expo:.1e}, bound 1e-12",
            time.perf_counter() - t0)


def test_criterion_05_kak():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(1000):
        g = random_group_element(1 + i % 3, rng)
        worst = max(worst, kak_residual(g, kak(g)))
    n = 2
    I = np.eye(n + 2)
    pure = kl.simple_divergence([boost(j, n) for j in range(1, 14)])
    r = kl.plane_rotation(n, 0, 2, 0.9)
    rot = kl.simple_divergence([r @ boost(j, n) for j in range(1, 14)])
    errs = [np.max(np.abs(pure.l1 - I)), np.max(np.abs(pure.l2 - I)),
            np.max(np.abs(rot.l1 - r.mat)), np.max(np.abs(rot.l2 - I))]
    kerr = float(max(errs))
    ok = worst < 1e-9 and pure.simple and rot.simple and kerr < 1e-8
    _record(5, "KAK reconstruction and simple divergence", ok,
            f"max reconstruction residual {worst:.1e} over 1000 elements (bound 1e-9); "
            f"l1/l2 error {kerr:.1e} on pure and rotated boosts (bound 1e-8)", time.perf_counter() - t0)


def test_criterion_06_maximality(out_root):
    t0 = time.perf_counter()
    code, rep = _run_config("maximality", out_root)
    el = time.perf_counter() - t0
    cases = {c["name"]: c for c in rep["results"]["cases"]}
    sch = cases["schottky_hemisphere"]
    detail = (f"translation/sphere-minus-point {cases['translation_sphere_minus_point']['verdict']}, "
              f"Schottky/hemisphere {sch['verdict']} with gap {sch['gap']:.3f} >= separation {sch['min_gap']:.3f}, "
              f"rotation/sphere-minus-circle {cases['rotation_sphere_minus_circle']['verdict']}; exit {code}; depth 8")
    _record(6, "maximality verdicts", code == 0, detail, el, 60)


def test_criterion_07_normal_domains(out_root):
    t0 = time.perf_counter()
    code, rep = _run_config("normal_domain", out_root)
    el = time.perf_counter() - t0
    c = {x["name"]: x for x in rep["results"]["cases"]}
    cone, pt, fib = c["cone_k1"], c["point_deleted_r3"], c["fibered_cone"]
    ok = (code == 0 and 2.79 <= cone["first_fixed_pair_distance"] <= 2.84 and cone["passed"]
          and pt["passed"] and fib["passed"])
    detail = (f"cone k=1 h=0.01 worst ratio {cone['worst_ratio']:.4f} (<= sqrt2 (1+eta)), wedge pair "
              f"{cone['first_fixed_pair_distance']:.4f} in [2.79, 2.84]; punctured R^3 worst {pt['worst_ratio']:.3f} "
              f"(<= 1+eta, {pt['pairs']} pairs); fibered worst {fib['worst_ratio']:.3f} (<= 2 sqrt2 (1+eta), "
              f"{fib['pairs']} pairs)")
    _record(7, "normal-domain bounds", ok, detail, el, 120)


def test_criterion_08_product_length():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    L, y1, y2 = 3.0, np.array([0.0, 1.0]), np.array([4.0, -2.0])
    s = np.linspace(0.0, L, 4001)[:, None]
    lin = y1 + (y2 - y1) * s / L
    target = math.sqrt(L * L + float(np.sum((y2 - y1) ** 2)))
    err = abs(nd.product_min_length(L, y1, y2, lin).length - target)
    excess = []
    for _ in range(100):
        k = rng.integers(1, 6, size=2)
        amp = rng.normal(scale=0.3, size=2)
        bump = amp * np.sin(math.pi * k * s / L)
        excess.append(nd.product_min_length(L, y1, y2, lin + bump).length - target)
    ok = err < 1e-8 and min(excess) > 0
    _record(8, "product-length minimizer", ok,
            f"linear beta error {err:.1e} (bound 1e-8); 100 perturbed beta exceed the minimum by at least "
            f"{min(excess):.2e}", time.perf_counter() - t0)


def test_criterion_09_cauchy(out_root):
    t0 = time.perf_counter()
    c1, r1 = _run_config("cauchy_point", out_root)
    c2, r2 = _run_config("cauchy_two_points", out_root)
    el = time.perf_counter() - t0
    same = [p for p in r1["results"]["pairs"]]
    cross = [p for p in r2["results"]["pairs"] if p["kind"] == "cross-fiber"]
    ok = (c1 == 0 and c2 == 0 and len(same) == 10 and all(p["verdict"] == "Equivalent" for p in same)
          and max(p["coset_residual"] for p in same) < 1e-8 and cross
          and all(p["verdict"] == "Inequivalent" for p in cross))
    detail = (f"{len(same)} same-fiber pairs Equivalent, max coset residual "
              f"{max(p['coset_residual'] for p in same):.1e} (bound 1e-8); {len(cross)} cross-fiber pairs Inequivalent")
    _record(9, "Cauchy-boundary probe", ok, detail, el, 60)


def test_criterion_10_determinism(out_root):
    t0 = time.perf_counter()
    names = sorted(p.stem for p in CONFIGS.glob("*.json"))
    mismatched = []
    for name in names:
        if name not in _REPORTS:
            _run_config(name, out_root)
        first = out_root / name
        again = out_root / f"{name}.rerun"
        cli.run(CONFIGS / f"{name}.json", again)
        a = json.loads((first / cli.REPORT_NAME).read_text())
        b = json.loads((again / cli.REPORT_NAME).read_text())
        a.pop("wall_clock_s"), b.pop("wall_clock_s")
        same = json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
        for art in a.get("artifacts", []):
            same &= (first / art).read_bytes() == (again / art).read_bytes()
        if not same:
            mismatched.append(name)
    _record(10, "determinism", not mismatched,
            f"{len(names)} scenario configs rerun with the same seed; "
            + ("reports and point clouds byte-identical apart from wall-clock" if not mismatched
               else f"differences in {mismatched}"), time.perf_counter() - t0)


if __name__ == "__main__":
    import sys
    import tempfile

    root = Path(tempfile.mkdtemp(prefix="mobiuskit-acceptance-"))
    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            fn(root) if "out_root" in fn.__code__.co_varnames[:fn.__code__.co_argcount] else fn()
        except AssertionError:
            failed += 1
        except Exception as exc:  # report and keep going
            failed += 1
            print(f"{name}: error {type(exc).__name__}: {exc}")
    sys.exit(1 if failed else 0)
