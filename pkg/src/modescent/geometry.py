"""Constraint-manifold geometry: projection, the cheap normal-line retraction,
and feasible starting points.

A chart is the set {H = 0} intersected with a chosen subset of inequalities
held at zero.  Projection is a Lagrange-Newton iteration on the stationarity
system of min ||z - y||^2 subject to the chart equalities.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NoRoot
from .problems import ProblemSpec, as_point

# points are accepted as feasible / on-manifold up to this absolute tolerance
FEAS_TOL = 1e-9


@dataclass(frozen=True)
class ManifoldChart:
    """Equalities H = 0 plus inequality indices (1-based) pinned to zero."""

    problem: ProblemSpec
    ineq_indices: tuple = ()

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.ineq_indices))
        if len(set(idx)) != len(idx):
            raise ValueError("duplicate inequality indices in chart")
        if any(i < 1 or i > self.problem.m_G for i in idx):
            raise ValueError("inequality index out of range for chart")
        object.__setattr__(self, "ineq_indices", idx)

    @property
    def n_rows(self) -> int:
        return self.problem.m_H + len(self.ineq_indices)


def chart_value(chart: ManifoldChart, x) -> np.ndarray:
    p = chart.problem
    parts = []
    if p.m_H > 0:
        parts.append(np.asarray(p.H(x), dtype=float).reshape(p.m_H))
    if chart.ineq_indices:
        g = np.asarray(p.G(x), dtype=float).reshape(p.m_G)
        parts.append(g[[i - 1 for i in chart.ineq_indices]])
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


def chart_jacobian(chart: ManifoldChart, x) -> np.ndarray:
    p = chart.problem
    parts = []
    if p.m_H > 0:
        parts.append(np.asarray(p.DH(x), dtype=float).reshape(p.m_H, p.n))
    if chart.ineq_indices:
        dg = np.asarray(p.DG(x), dtype=float).reshape(p.m_G, p.n)
        parts.append(dg[[i - 1 for i in chart.ineq_indices]])
    if not parts:
        return np.zeros((0, p.n))
    return np.vstack(parts)


def project(chart: ManifoldChart, y, *, max_iter: int = 100, _init=None) -> np.ndarray:
    """Nearest-point projection of ``y`` onto the chart manifold.

    Lagrange-Newton iteration on the stationarity system

        z - y + DC(z)^T mu = 0,   C(z) = 0,

    initialized at ``y``, with damped steps on a merit-function increase.
    Raises ``NoConvergence`` when the iteration stalls (``y`` too far from
    the manifold, or a degenerate configuration such as an equidistant
    center point).
    """
    p = chart.problem
    y = as_point(y, p.n)
    if chart.n_rows == 0:
        return y.copy()

    z = as_point(_init, p.n).copy() if _init is not None else y.copy()
    n = p.n

    # damped Gauss-Newton feasibility presolve when far from the manifold;
    # plain Newton on the stationarity system diverges there
    c = chart_value(chart, z)
    for _ in range(60):
        if np.max(np.abs(c)) <= 1e-6:
            break
        J = chart_jacobian(chart, z)
        try:
            dz = -J.T @ np.linalg.solve(J @ J.T, c)
        except np.linalg.LinAlgError:
            raise NoConvergence("projection: singular constraint Jacobian") from None
        merit0 = float(c @ c)
        step = 1.0
        for _ in range(40):
            c_try = chart_value(chart, z + step * dz)
            if float(c_try @ c_try) < merit0:
                z = z + step * dz
                c = c_try
                break
            step *= 0.5
        else:
            raise NoConvergence("projection: feasibility presolve stalled")
    else:
        raise NoConvergence("projection: feasibility presolve hit its cap")

    mu, *_ = np.linalg.lstsq(chart_jacobian(chart, z).T, y - z, rcond=None)
    for _ in range(max_iter):
        c = chart_value(chart, z)
        J = chart_jacobian(chart, z)
        r1 = z - y + J.T @ mu
        if np.max(np.abs(c)) <= 1e-12 and np.max(np.abs(r1)) <= 1e-10:
            return z
        kkt = np.zeros((n + chart.n_rows, n + chart.n_rows))
        kkt[:n, :n] = np.eye(n)
        kkt[:n, n:] = J.T
        kkt[n:, :n] = J
        rhs = -np.concatenate([r1, c])
        try:
            delta = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            raise NoConvergence("projection: singular KKT system (degenerate point)") from None
        dz, dmu = delta[:n], delta[n:]
        merit0 = float(c @ c + r1 @ r1)
        step = 1.0
        for _ in range(30):
            z_try = z + step * dz
            mu_try = mu + step * dmu
            c_try = chart_value(chart, z_try)
            r1_try = z_try - y + chart_jacobian(chart, z_try).T @ mu_try
            if float(c_try @ c_try + r1_try @ r1_try) < merit0:
                z, mu = z_try, mu_try
                break
            step *= 0.5
        else:
            raise NoConvergence("projection: damped Newton made no progress")
    raise NoConvergence(f"projection did not converge within {max_iter} iterations")


def _bisect(phi, a, fa, b, fb):
    # fa and fb bracket a sign change; returns the root to machine resolution
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = phi(mid)
        if fm == 0.0 or (b - a) <= 1e-16 * max(1.0, abs(mid)):
            return mid
        if (fa < 0.0) != (fm < 0.0):
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


def retract_psi(chart: ManifoldChart, x, w, *, growth_limit: int = 60) -> np.ndarray:
    """Cheap retraction along the constraint normal for single-equality charts.

    Returns x + w + s * grad(c)(x) where s is the smallest-magnitude root of
    s -> c(x + w + s * grad(c)(x)), found by bracketing outward from s = 0
    and bisecting.  Requires x on the chart (within 1e-10) and w tangent
    (within 1e-8).
    """
    p = chart.problem
    if chart.n_rows != 1:
        raise ValueError("psi retraction is defined for single-equality charts only")
    x = as_point(x, p.n)
    w = as_point(w, p.n)
    c0 = float(chart_value(chart, x)[0])
    if abs(c0) > 1e-10:
        raise ValueError("retract_psi: base point is not on the chart manifold")
    g = chart_jacobian(chart, x)[0]
    gnorm = float(np.linalg.norm(g))
    if abs(g @ w) > 1e-8 * max(1.0, gnorm * float(np.linalg.norm(w))):
        raise ValueError("retract_psi: step is not tangent to the chart")

    base = x + w

    def phi(s):
        return float(chart_value(chart, base + s * g)[0])

    f0 = phi(0.0)
    if abs(f0) <= 1e-14:
        return base

    gsq = max(gnorm * gnorm, 1e-14)
    delta = max(1e-14, 0.1 * abs(f0) / gsq)
    prev = 0.0
    f_prev_pos = f0
    f_prev_neg = f0
    for _ in range(growth_limit):
        roots = []
        f_pos = phi(delta)
        if (f0 < 0.0) != (f_pos < 0.0) or f_pos == 0.0:
            roots.append(_bisect(phi, prev, f_prev_pos, delta, f_pos))
        f_neg = phi(-delta)
        if (f0 < 0.0) != (f_neg < 0.0) or f_neg == 0.0:
            roots.append(_bisect(phi, -delta, f_neg, -prev, f_prev_neg))
        if roots:
            s = min(roots, key=abs)
            return base + s * g
        prev = delta
        f_prev_pos, f_prev_neg = f_pos, f_neg
        delta *= 2.0
    raise NoRoot("retract_psi: no sign change within the bracket growth limit")


def chart_retraction(chart: ManifoldChart, kind: str = "project"):
    """Retraction callable (base, step) -> point for the given chart.

    ``kind`` is "project" (nearest-point, any chart) or "psi" (normal-line
    root, single-equality charts only).
    """
    if chart.n_rows == 0:
        return lambda x, w: x + w
    if kind == "project":
        return lambda x, w: project(chart, x + w)
    if kind == "psi":
        if chart.n_rows != 1:
            raise ValueError("psi retraction requires a single-equality chart")
        return lambda x, w: retract_psi(chart, x, w)
    raise ValueError(f"unknown retraction kind {kind!r}")


def _project_with_retries(chart: ManifoldChart, x):
    try:
        return project(chart, x)
    except NoConvergence:
        pass
    # deterministic perturbation schedule for degenerate targets
    for scale in (1e-3, 1e-2, 1e-1):
        for j in range(chart.problem.n):
            for sign in (1.0, -1.0):
                init = x.copy()
                init[j] += sign * scale * max(1.0, abs(x[j]))
                try:
                    return project(chart, x, _init=init)
                except NoConvergence:
                    continue
    raise NoConvergence("feasible start: projection failed from all retry seeds")


def feasible_start(problem: ProblemSpec, x) -> np.ndarray:
    """Point of the feasible set nearest to ``x`` (locally).

    Active-set loop around the chart projection: violated inequalities are
    pinned to zero, projected, and dropped again when their distance
    multiplier turns negative.  Global minimality is not guaranteed; at
    equidistant degenerate targets an arbitrary nearby feasible point is
    returned.
    """
    x = as_point(x, problem.n)
    h_ok = problem.m_H == 0 or np.max(np.abs(problem.H(x))) <= FEAS_TOL
    g_val = np.asarray(problem.G(x), dtype=float) if problem.m_G > 0 else np.zeros(0)
    if h_ok and (g_val.size == 0 or np.max(g_val) <= FEAS_TOL):
        return x.copy()

    active = {int(i) + 1 for i in np.flatnonzero(g_val > FEAS_TOL)}
    for _ in range(2 * problem.m_G + 4):
        chart = ManifoldChart(problem, tuple(sorted(active)))
        z = _project_with_retries(chart, x)
        if problem.m_G > 0:
            gz = np.asarray(problem.G(z), dtype=float).reshape(problem.m_G)
            newly = {int(i) + 1 for i in np.flatnonzero(gz > FEAS_TOL)} - active
            if newly:
                active |= newly
                continue
        if active:
            # sign check of the distance multipliers: z - x + J^T mult = 0
            J = chart_jacobian(chart, z)
            mult, *_ = np.linalg.lstsq(J.T, x - z, rcond=None)
            nu = mult[problem.m_H:]
            drop = {i for i, v in zip(sorted(active), nu) if v < -FEAS_TOL}
            if drop:
                active -= drop
                continue
        return z
    raise NoConvergence("feasible start: active set did not settle")
