"""Shared test utilities: fixture problems, random quadratic generators, and
independent brute-force oracles."""

from __future__ import annotations

import itertools
import json

import numpy as np

from gaugecut import Problem, QuadraticForm, load_problem


def circle_dict(integer=(False, False), interior=True) -> dict:
    d = {
        "variables": [
            {"name": "x", "lb": -10.0, "ub": 10.0, "integer": integer[0]},
            {"name": "y", "lb": -10.0, "ub": 10.0, "integer": integer[1]},
        ],
        "objective": [-1.0, -1.0],
        "constraints": [{"name": "ball", "expr": "x^2 + y^2 - 1"}],
    }
    if interior:
        d["interior_point"] = [0.0, 0.0]
    return d


def make_circle(**kwargs) -> Problem:
    return load_problem(json.dumps(circle_dict(**kwargs)))


def make_nonconvex_circle() -> Problem:
    """Same feasible set as the unit disk, represented by a non-convex
    function: 1 - exp(1 - x^2 - y^2) <= 0  <=>  x^2 + y^2 <= 1."""
    return load_problem(json.dumps({
        "variables": [
            {"name": "x", "lb": -10.0, "ub": 10.0, "integer": False},
            {"name": "y", "lb": -10.0, "ub": 10.0, "integer": False},
        ],
        "objective": [-1.0, -1.0],
        "constraints": [{"name": "shell", "expr": "1 - exp(1 - x^2 - y^2)"}],
        "interior_point": [0.0, 0.0],
    }))


def make_thin() -> Problem:
    """{x <= 0} ∩ {-x <= 0}: a single point, no interior."""
    return load_problem(json.dumps({
        "variables": [{"name": "x", "lb": -10.0, "ub": 10.0, "integer": False}],
        "objective": [1.0],
        "constraints": [{"name": "le", "expr": "x"}, {"name": "ge", "expr": "-x"}],
    }))


def sample_unit_disk(rng: np.random.Generator, count: int) -> np.ndarray:
    """Uniform points of the closed unit disk by rejection."""
    out = []
    while len(out) < count:
        cand = rng.uniform(-1.0, 1.0, size=(2 * count, 2))
        keep = np.sum(cand**2, axis=1) <= 1.0
        out.extend(cand[keep])
    return np.array(out[:count])


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_psd_quadratic(
    rng: np.random.Generator,
    n: int,
    singular: bool,
    b_in_range: bool,
) -> QuadraticForm:
    """PSD quadratic with 0 strictly interior to {g <= 0}.  When
    ``b_in_range`` is False the matrix is forced singular and b gets a kernel
    component of size >= 0.5, so the range-membership decision is never
    borderline."""
    eigs = rng.uniform(0.5, 3.0, size=n)
    kernel_dim = 0
    if singular or not b_in_range:
        kernel_dim = int(rng.integers(1, n)) if n > 1 else 1
        eigs[:kernel_dim] = 0.0
    Q = random_orthogonal(rng, n)
    A = Q @ np.diag(eigs) @ Q.T
    z = rng.uniform(-1.0, 1.0, size=n)
    b = A @ z
    if not b_in_range:
        coeffs = rng.uniform(0.5, 1.5, size=kernel_dim) * rng.choice([-1.0, 1.0], size=kernel_dim)
        b = b + Q[:, :kernel_dim] @ coeffs
    c0 = -float(rng.uniform(0.5, 2.0))
    return QuadraticForm(A, b, c0)


def brute_force_lp(lower, upper, cuts, c, tol=1e-7):
    """Vertex-enumeration oracle for small LPs: every choice of n active
    constraints among bound rows and cut rows, solved and filtered.  Returns
    (value, x) or (None, None) when no feasible vertex exists (which for a
    bounded nonempty polytope means the set is empty)."""
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    c = np.asarray(c, float)
    n = lower.shape[0]
    rows = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        rows.append((e, lower[j]))
        rows.append((e, upper[j]))
    for cut in cuts:
        rows.append((np.asarray(cut.alpha, float), float(cut.beta)))

    def feasible(x):
        if np.any(x < lower - tol) or np.any(x > upper + tol):
            return False
        return all(cut.alpha @ x <= cut.beta + tol for cut in cuts)

    best, bestx = None, None
    for combo in itertools.combinations(range(len(rows)), n):
        A = np.array([rows[i][0] for i in combo])
        b = np.array([rows[i][1] for i in combo])
        if abs(np.linalg.det(A)) < 1e-10:
            continue
        x = np.linalg.solve(A, b)
        if not feasible(x):
            continue
        val = float(c @ x)
        if best is None or val < best:
            best, bestx = val, x
    return best, bestx


def supporting_oracle_quadratic(
    q: QuadraticForm, xbar: np.ndarray, affine_on_segment, eval_value
) -> bool:
    """Independent oracle for the quadratic classifier: a linearization cut at
    the infeasible ``xbar`` supports {g <= 0} iff some segment from ``xbar``
    into the set keeps g affine.  For quadratics the affine directions are the
    kernel of A, so probe kernel basis directions (and random combinations)
    with a wide range of step lengths, confirm affineness with
    affine_on_segment, and look for a feasible endpoint."""
    w, V = np.linalg.eigh(q.A)
    kernel = V[:, np.abs(w) <= 1e-9]
    if kernel.shape[1] == 0:
        return False
    g = q.to_expr()
    rng = np.random.default_rng(7)
    directions = [kernel[:, i] for i in range(kernel.shape[1])]
    for _ in range(4):
        combo = kernel @ rng.standard_normal(kernel.shape[1])
        norm = np.linalg.norm(combo)
        if norm > 1e-12:
            directions.append(combo / norm)
    for v in directions:
        for t in np.concatenate([np.geomspace(1e-2, 1e4, 25), -np.geomspace(1e-2, 1e4, 25)]):
            endpoint = xbar + t * v
            if float(eval_value(g, endpoint)) <= 0.0:
                if affine_on_segment(g, endpoint, xbar, samples=17):
                    return True
    return False
