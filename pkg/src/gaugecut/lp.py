"""Linear relaxations: a cut pool over box bounds and a bounded-variable
primal simplex.

The relaxation solved at every cutting-plane iteration is

    min c^T x   s.t.   lower <= x <= upper,   alpha_k^T x <= beta_k  (pool)

Cuts are stored normalized (max-norm of alpha equal to one) so that
deduplication is scale-invariant: cuts that differ only by a positive factor
are the same half-space.  The simplex is a dense two-phase method with upper
bounds handled natively (no big-M): structural variables live in the box,
slacks in [0, inf), and rows that start infeasible get one artificial each.
Pricing is Dantzig with a switch to Bland's rule after 10*(rows+cols) pivots,
which makes runs deterministic and guards against cycling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SimplexNumericalError

__all__ = ["Cut", "LpModel", "LpSolution", "add_cut", "lp_solve"]

DEDUP_TOL = 1e-9
FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-10
_PHASE1_TOL = 1e-7

_BASIC, _AT_LOWER, _AT_UPPER = 0, 1, 2


@dataclass(frozen=True, eq=False)
class Cut:
    """Linear inequality ``alpha^T x <= beta`` with provenance.

    ``origin`` is one of ``"kelley"`` (linearized at the separated point),
    ``"esh"`` (linearized at a boundary point found by line search) or
    ``"user"``.  ``constraint`` names the generating constraint and ``point``
    is where the cut was generated.  The stored form is normalized:
    ``max|alpha| == 1``.
    """

    alpha: np.ndarray
    beta: float
    origin: str = "user"
    constraint: str | None = None
    point: np.ndarray | None = None

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float)
        if alpha.ndim != 1:
            raise ValueError(f"alpha must be a vector, got shape {alpha.shape}")
        scale = float(np.max(np.abs(alpha)))
        if scale == 0.0:
            raise ValueError("cut normal must be nonzero")
        alpha = alpha / scale
        beta = float(self.beta) / scale
        if not (np.all(np.isfinite(alpha)) and np.isfinite(beta)):
            raise ValueError("cut coefficients are not finite after normalization")
        if self.origin not in ("kelley", "esh", "user"):
            raise ValueError(f"unknown cut origin {self.origin!r}")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        point = self.point
        if point is not None:
            point = np.array(point, dtype=float)
            point.setflags(write=False)
        object.__setattr__(self, "point", point)

    def same_as(self, other: "Cut", tol: float = DEDUP_TOL) -> bool:
        """Scale-invariant equality of the half-spaces (both are normalized)."""
        return (
            self.alpha.shape == other.alpha.shape
            and float(np.max(np.abs(self.alpha - other.alpha))) <= tol
            and abs(self.beta - other.beta) <= tol
        )

    def violation(self, x) -> float:
        """``alpha^T x - beta``; positive means ``x`` is cut off."""
        return float(self.alpha @ np.asarray(x, dtype=float) - self.beta)

    def to_json(self) -> dict:
        origin: dict = {"method": self.origin}
        if self.constraint is not None:
            origin["constraint"] = self.constraint
        if self.point is not None:
            origin["point"] = [float(v) for v in self.point]
        return {"alpha": [float(a) for a in self.alpha], "beta": self.beta, "origin": origin}


@dataclass
class LpModel:
    """Box bounds, linear objective, and the accumulating cut pool."""

    lower: np.ndarray
    upper: np.ndarray
    objective: np.ndarray
    cuts: list[Cut] = field(default_factory=list)

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.lower.shape[0]
        if self.upper.shape != (n,) or self.objective.shape != (n,):
            raise ValueError("lower, upper, objective must have equal lengths")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("bounds must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n(self) -> int:
        return self.lower.shape[0]


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str  # "optimal" | "infeasible"
    x: np.ndarray | None
    objective_value: float | None


def add_cut(m: LpModel, cut: Cut) -> bool:
    """Append ``cut`` to the pool unless an equal normalized cut is already
    there (within :data:`DEDUP_TOL`).  Returns True iff the pool grew."""
    if cut.alpha.shape != (m.n,):
        raise ValueError(f"cut dimension {cut.alpha.shape[0]} does not match model ({m.n})")
    for existing in m.cuts:
        if existing.same_as(cut):
            return False
    m.cuts.append(cut)
    return True


def lp_solve(m: LpModel) -> LpSolution:
    """Solve the relaxation to a primal-optimal vertex, or report that the
    cuts exclude the whole box."""
    n = m.n
    c = m.objective
    if not m.cuts:
        x = np.where(c > 0.0, m.lower, np.where(c < 0.0, m.upper, m.lower))
        return LpSolution("optimal", x, float(c @ x))
    rows = len(m.cuts)
    A = np.vstack([cut.alpha for cut in m.cuts])
    b = np.array([cut.beta for cut in m.cuts])
    solver = _Simplex(A, b, m.lower, m.upper, c)
    return solver.solve()


class _Simplex:
    """Dense bounded-variable primal simplex, two phases.

    Columns 0..n-1 are structural, n..n+m-1 are row slacks (lb 0, no ub);
    artificials are appended only for rows whose slack starts negative.
    Basic values are recomputed from scratch every iteration (desk-scale
    problems; stability over speed).
    """

    def __init__(self, A, b, lower, upper, c):
        self.mrows, self.nstruct = A.shape
        m, n = self.mrows, self.nstruct
        self.b = b
        self.cost = np.concatenate([c, np.zeros(m)])
        self.A = np.hstack([A, np.eye(m)])
        self.lo = np.concatenate([lower, np.zeros(m)])
        self.hi = np.concatenate([upper, np.full(m, np.inf)])
        self.pivots = 0
        # budgets per the deterministic pivoting rule: Dantzig first, Bland after
        total_cols = n + 2 * m  # worst case with artificials
        self.dantzig_budget = 10 * (m + total_cols)
        self.total_budget = 100 * (m + total_cols) + 1000

    # -- state helpers ---------------------------------------------------

    def _nonbasic_value(self, j: int) -> float:
        return self.lo[j] if self.status[j] == _AT_LOWER else self.hi[j]

    def _basic_values(self) -> np.ndarray:
        rhs = self.b.copy()
        for j in range(self.A.shape[1]):
            if self.status[j] != _BASIC:
                v = self._nonbasic_value(j)
                if v != 0.0:
                    rhs -= self.A[:, j] * v
        B = self.A[:, self.basis]
        try:
            return np.linalg.solve(B, rhs)
        except np.linalg.LinAlgError as err:
            raise SimplexNumericalError(f"singular basis matrix: {err}") from err

    # -- setup -----------------------------------------------------------

    def solve(self) -> LpSolution:
        m, n = self.mrows, self.nstruct
        ncols = n + m
        self.status = np.empty(ncols, dtype=int)
        for j in range(n):
            self.status[j] = _AT_LOWER if self.cost[j] >= 0.0 else _AT_UPPER
        self.status[n:] = _AT_LOWER
        x_struct = np.array([self._nonbasic_value(j) for j in range(n)])
        resid = self.b - self.A[:, :n] @ x_struct

        self.basis = []
        artificials = []
        for i in range(m):
            if resid[i] >= -FEAS_TOL:
                self.basis.append(n + i)  # slack basic at resid[i] >= 0
            else:
                col = np.zeros(m)
                col[i] = -1.0
                self.A = np.hstack([self.A, col[:, None]])
                self.lo = np.append(self.lo, 0.0)
                self.hi = np.append(self.hi, np.inf)
                self.cost = np.append(self.cost, 0.0)
                self.status = np.append(self.status, _BASIC)
                a_col = self.A.shape[1] - 1
                artificials.append(a_col)
                self.basis.append(a_col)
        for i, j in enumerate(self.basis):
            self.status[j] = _BASIC

        self.artificial_set = set(artificials)

        if artificials:
            phase1_cost = np.zeros(self.A.shape[1])
            phase1_cost[artificials] = 1.0
            self._iterate(phase1_cost, allow_artificials=True)
            xB = self._basic_values()
            # nonbasic artificials sit at their lower bound 0, so the residual
            # infeasibility is the sum of the basic ones
            infeasibility = sum(
                xB[i] for i, j in enumerate(self.basis) if j in self.artificial_set
            )
            if infeasibility > _PHASE1_TOL:
                return LpSolution("infeasible", None, None)
            self._drive_out_artificials()

        self._iterate(self.cost, allow_artificials=False)

        xB = self._basic_values()
        x = np.empty(self.nstruct)
        for j in range(self.nstruct):
            if self.status[j] == _BASIC:
                x[j] = xB[self.basis.index(j)]
            else:
                x[j] = self._nonbasic_value(j)
        return LpSolution("optimal", x, float(self.cost[: self.nstruct] @ x))

    # -- core loop -------------------------------------------------------

    def _eligible(self, d: np.ndarray, allow_artificials: bool) -> list[int]:
        out = []
        for j in range(self.A.shape[1]):
            if self.status[j] == _BASIC:
                continue
            if not allow_artificials and j in self.artificial_set:
                continue
            if self.hi[j] <= self.lo[j]:
                continue  # fixed variable: cannot move, any reduced cost is fine
            if self.status[j] == _AT_LOWER and d[j] < -FEAS_TOL:
                out.append(j)
            elif self.status[j] == _AT_UPPER and d[j] > FEAS_TOL:
                out.append(j)
        return out

    def _iterate(self, cost: np.ndarray, allow_artificials: bool) -> None:
        while True:
            if self.pivots > self.total_budget:
                raise SimplexNumericalError(
                    f"pivot limit exceeded after {self.pivots} pivots; "
                    "numerical cycling suspected"
                )
            B = self.A[:, self.basis]
            try:
                y = np.linalg.solve(B.T, cost[self.basis])
            except np.linalg.LinAlgError as err:
                raise SimplexNumericalError(f"singular basis matrix: {err}") from err
            d = cost - y @ self.A
            eligible = self._eligible(d, allow_artificials)
            if not eligible:
                return
            if self.pivots <= self.dantzig_budget:
                entering = max(eligible, key=lambda j: (abs(d[j]), -j))
            else:
                entering = min(eligible)  # Bland
            self._pivot(entering)

    def _pivot(self, entering: int) -> None:
        xB = self._basic_values()
        B = self.A[:, self.basis]
        w = np.linalg.solve(B, self.A[:, entering])
        sigma = 1.0 if self.status[entering] == _AT_LOWER else -1.0

        # largest step t >= 0 keeping x_B within bounds; x_e moves by sigma*t
        t_best = self.hi[entering] - self.lo[entering]  # bound flip
        leave_pos = -1
        leave_to = _AT_LOWER
        for i in range(self.mrows):
            wi = sigma * w[i]
            var = self.basis[i]
            if wi > _PIVOT_TOL:
                ti = (xB[i] - self.lo[var]) / wi
                hit = _AT_LOWER
            elif wi < -_PIVOT_TOL and np.isfinite(self.hi[var]):
                ti = (xB[i] - self.hi[var]) / wi
                hit = _AT_UPPER
            else:
                continue
            ti = max(ti, 0.0)
            if ti < t_best - _PIVOT_TOL:
                t_best, leave_pos, leave_to = ti, i, hit
            elif (
                leave_pos >= 0
                and ti <= t_best + _PIVOT_TOL
                and var < self.basis[leave_pos]
            ):
                # equal blocking step within tolerance: smaller variable
                # index leaves (Bland-safe, deterministic)
                t_best, leave_pos, leave_to = min(ti, t_best), i, hit

        if not np.isfinite(t_best):
            raise SimplexNumericalError(
                "unbounded ray encountered; the relaxation should be bounded by the box"
            )
        self.pivots += 1
        if leave_pos < 0:
            # bound flip, basis unchanged
            self.status[entering] = (
                _AT_UPPER if self.status[entering] == _AT_LOWER else _AT_LOWER
            )
            return
        leaving = self.basis[leave_pos]
        self.status[leaving] = leave_to
        self.basis[leave_pos] = entering
        self.status[entering] = _BASIC

    def _drive_out_artificials(self) -> None:
        """Replace basic artificials (at value 0) by real columns; always
        possible because [A | I] has full row rank."""
        for pos in range(self.mrows):
            var = self.basis[pos]
            if var not in self.artificial_set:
                continue
            B = self.A[:, self.basis]
            e = np.zeros(self.mrows)
            e[pos] = 1.0
            row = np.linalg.solve(B.T, e)
            swapped = False
            for j in range(self.nstruct + self.mrows):
                if self.status[j] == _BASIC:
                    continue
                if abs(row @ self.A[:, j]) > 1e-9:
                    self.status[var] = _AT_LOWER
                    self.basis[pos] = j
                    self.status[j] = _BASIC
                    swapped = True
                    break
            if not swapped:
                raise SimplexNumericalError(
                    "could not remove an artificial variable from the basis"
                )


def check_solution(m: LpModel, sol: LpSolution, tol: float = FEAS_TOL) -> None:
    """Assert the optimality-side invariants of a solution: bounds and every
    pool cut satisfied to ``tol``.  Used by tests after each solve."""
    if sol.status != "optimal":
        return
    x = sol.x
    assert np.all(x >= m.lower - tol), "solution violates a lower bound"
    assert np.all(x <= m.upper + tol), "solution violates an upper bound"
    for cut in m.cuts:
        assert cut.violation(x) <= tol, "solution violates a pool cut"
