"""Acceptance suite: one test per release criterion, each printing a PASS or
FAIL line (visible with ``pytest -s`` or ``-rA``).  Tolerances are fixed here,
not configurable."""

import functools
import itertools
import json
import math
import time
import warnings

import numpy as np

from gaugecut import (
    affine_on_segment,
    classify_quadratic,
    esh_cut,
    eval_grad,
    eval_value,
    gauge_subgradient_check,
    gauge_values,
    kelley_cut,
    line_search_boundary,
    load_problem,
    parse,
    solve_bnb,
    solve_esh,
    solve_kelley,
)
from gaugecut.model import Constraint, Problem, SolverConfig, max_violation

from helpers import make_circle, make_nonconvex_circle, random_psd_quadratic, sample_unit_disk
from test_expr import FD_FIXTURES

SQRT2 = math.sqrt(2.0)
ORIGIN = np.zeros(2)


def criterion(num, label):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.time()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[criterion {num:2d}] FAIL  {label}")
                raise
            print(f"[criterion {num:2d}] PASS  {label}  ({time.time() - start:.2f}s)")
        return wrapper
    return deco


@criterion(1, "Kelley cut at (1.5,1.5) normalizes to x + y <= 11/6 exactly")
def test_criterion_01_kelley_cut_exact():
    circle = make_circle()
    cut = kelley_cut(circle.constraints[0].expr, [1.5, 1.5], "ball")
    assert abs(cut.alpha[0] - 1.0) <= 1e-12
    assert abs(cut.alpha[1] - 1.0) <= 1e-12
    assert abs(cut.beta - 11.0 / 6.0) <= 1e-12


@criterion(2, "ESH boundary point (1/sqrt2,1/sqrt2) +-1e-8, cut x + y <= sqrt2 +-1e-7")
def test_criterion_02_esh_cut():
    circle = make_circle()
    gr = line_search_boundary(circle.constraints, ORIGIN, [1.5, 1.5])
    assert np.max(np.abs(gr.boundary_point - 1.0 / SQRT2)) <= 1e-8
    cut = esh_cut(circle.constraints, gr)[0]
    assert np.max(np.abs(cut.alpha - 1.0)) <= 1e-7
    assert abs(cut.beta - SQRT2) <= 1e-7


@criterion(3, "gauge(1.5,1.5) = sqrt(4.5) +-1e-7 and positive homogeneity within 1e-7")
def test_criterion_03_gauge_value_and_homogeneity():
    circle = make_circle()
    xbar = np.array([1.5, 1.5])
    gr = line_search_boundary(circle.constraints, ORIGIN, xbar)
    assert abs(gr.gauge_value - math.sqrt(4.5)) <= 1e-7
    # homogeneity at t = 10 needs the measurement itself to be much finer
    # than 1e-7: gauge error grows with gauge^2 * line_search_tol
    cfg = SolverConfig(line_search_tol=1e-12)
    base = line_search_boundary(circle.constraints, ORIGIN, xbar, cfg).gauge_value
    for t in (0.5, 2.0, 10.0):
        scaled = line_search_boundary(circle.constraints, ORIGIN, t * xbar, cfg).gauge_value
        assert abs(scaled - t * base) <= 1e-7


def _quadratic_problem(rng, n):
    singular = bool(rng.random() < 0.4)
    b_in_range = bool(rng.random() < 0.6)
    q = random_psd_quadratic(rng, n, singular, b_in_range)
    names = tuple(f"x{i}" for i in range(n))
    c = rng.uniform(-1.0, 1.0, size=n)
    c[np.abs(c) < 0.2] = 0.5
    return Problem(
        names=names,
        lower=np.full(n, -5.0),
        upper=np.full(n, 5.0),
        integrality=np.zeros(n, dtype=bool),
        objective=c,
        constraints=(Constraint("quad", q.to_expr(names)),),
        interior_point=np.zeros(n),
    )


@criterion(4, "every ESH cut passes the gauge subgradient check on a 21^n grid (1e-7)")
def test_criterion_04_equivalence_property():
    checked = 0
    fixtures = [make_circle()]
    rng = np.random.default_rng(404)
    for k in range(20):
        fixtures.append(_quadratic_problem(rng, n=1 + k % 4))
    for p in fixtures:
        n = p.n
        x0 = np.zeros(n)
        trace = solve_esh(p, SolverConfig(max_iters=25))
        cuts = trace.cuts
        if not cuts:
            continue
        axes = [np.linspace(-2.0, 2.0, 21)] * n
        grid = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # recession rays are skipped by design
            gauges = gauge_values(p.constraints, x0, grid)
            for cut in cuts:
                assert gauge_subgradient_check(
                    p.constraints, x0, cut, grid, sample_gauges=gauges
                ), f"cut {cut.to_json()} failed on fixture with n={n}"
                checked += 1
    assert checked >= 40  # the experiment must not be vacuous


@criterion(5, "quadratic classifier agrees with the affine-segment oracle 50/50 (<10s)")
def test_criterion_05_classifier_vs_oracle():
    from helpers import supporting_oracle_quadratic

    start = time.time()
    rng = np.random.default_rng(55)
    cases = 0
    trial = 0
    verdicts = {"always_supporting": 0, "never_supporting_from_infeasible": 0}
    while cases < 50:
        trial += 1
        n = int(rng.integers(2, 5))
        q = random_psd_quadratic(
            rng, n, singular=bool(rng.random() < 0.7), b_in_range=bool(rng.random() < 0.5)
        )
        direction = rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        xbar = None
        for t in np.geomspace(0.5, 64.0, 20):
            if q.value(t * direction) > 0.1:
                xbar = t * direction
                break
        if xbar is None:
            continue
        verdict = classify_quadratic(q)
        oracle = supporting_oracle_quadratic(q, xbar, affine_on_segment, eval_value)
        expected = "always_supporting" if oracle else "never_supporting_from_infeasible"
        assert verdict == expected, f"disagreement on case {cases} (n={n})"
        verdicts[verdict] += 1
        cases += 1
    assert cases == 50
    assert min(verdicts.values()) >= 10  # both classes genuinely exercised
    assert time.time() - start < 10.0


@criterion(6, "Kelley and ESH both reach -sqrt2 within 1e-3 at eps 1e-6; ESH needs <= iters")
def test_criterion_06_convergence():
    circle = make_circle()
    cfg = SolverConfig(eps_feas=1e-6)
    kelley = solve_kelley(circle, cfg)
    esh = solve_esh(circle, cfg)
    for trace in (kelley, esh):
        assert trace.status == "optimal_eps"
        assert abs(trace.objective + SQRT2) <= 1e-3
        f, _ = max_violation(circle.constraints, trace.x)
        assert f <= 1e-6
    assert len(esh.iterations) <= len(kelley.iterations)


@criterion(7, "ESH on the non-convex representation converges; all cuts valid (1e-9)")
def test_criterion_07_nonconvex_representation():
    p = make_nonconvex_circle()
    trace = solve_esh(p, SolverConfig(eps_feas=1e-6))
    assert trace.status == "optimal_eps"
    assert abs(trace.objective + SQRT2) <= 1e-3
    feasible = sample_unit_disk(np.random.default_rng(77), 1000)
    assert len(trace.cuts) >= 3
    for cut in trace.cuts:
        assert np.all(feasible @ cut.alpha <= cut.beta + 1e-9)


@criterion(8, "support gaps at (10,10): Kelley >= 1e-3, ESH <= 1e-7")
def test_criterion_08_support_gap_contrast():
    circle = make_circle()
    vertex = np.array([10.0, 10.0])
    kc = kelley_cut(circle.constraints[0].expr, vertex, "ball")
    gr = line_search_boundary(circle.constraints, ORIGIN, vertex)
    ec = esh_cut(circle.constraints, gr)[0]
    # support function of the unit disk: max alpha.x over the disk = ||alpha||_2
    kelley_gap = kc.beta - float(np.linalg.norm(kc.alpha))
    esh_gap = ec.beta - float(np.linalg.norm(ec.alpha))
    assert kelley_gap >= 1e-3
    assert abs(esh_gap) <= 1e-7


@criterion(9, "branch and bound on the integer circle returns -1 at (1,0) or (0,1)")
def test_criterion_09_integer_case():
    p = load_problem(json.dumps({
        "variables": [
            {"name": "x", "lb": -10.0, "ub": 10.0, "integer": True},
            {"name": "y", "lb": -10.0, "ub": 10.0, "integer": True},
        ],
        "objective": [-1.0, -1.0],
        "constraints": [{"name": "ball", "expr": "x^2 + y^2 - 1"}],
        "interior_point": [0.0, 0.0],
    }))
    trace = solve_bnb(p)
    assert trace.status == "optimal_eps"
    rounded = tuple(int(round(v)) for v in trace.x)
    assert rounded in ((1, 0), (0, 1))
    best = min(
        -x - y
        for x, y in itertools.product(range(-1, 2), repeat=2)
        if x * x + y * y <= 1
    )
    assert best == -1
    assert abs(trace.objective - best) <= 1e-4


@criterion(10, "gradients match central finite differences (rel 1e-6 / abs 1e-8)")
def test_criterion_10_ad_vs_finite_differences():
    h = 1e-6
    rng = np.random.default_rng(1010)
    for source, names, box in FD_FIXTURES:
        e = parse(source, names)
        for _ in range(100):
            x = rng.uniform(box[0] + 0.1, box[1] - 0.1, size=len(names))
            grad = eval_grad(e, x).gradient
            for j in range(len(names)):
                step = np.zeros(len(names))
                step[j] = h
                fd = (eval_value(e, x + step) - eval_value(e, x - step)) / (2 * h)
                assert abs(grad[j] - fd) <= max(1e-6 * abs(grad[j]), 1e-8), (
                    f"{source} coordinate {j} at {x}"
                )
