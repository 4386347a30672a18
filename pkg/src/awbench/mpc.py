"""Constrained predictive controller over control increments.

The controller condenses an LTI prediction model into ``y = Phi x + G du``
and minimizes ``sum (r - y)^2 + lambda * sum du^2`` subject to per-sample
increment bounds and cumulative amplitude bounds on the command.  The QP
is solved with Hildreth's dual coordinate ascent, so no external
optimizer is needed; the inner sweep is JIT-compiled.

The prediction model is, by default, the plant in series with the
actuator's linear lag (saturation elements stay out of the model; the QP
constraints handle them explicitly).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numba import njit

from .actuator import ActuatorParams
from .control_math import DiscreteStateSpace, StateSpace, zoh_discretize
from .controllers import Measurement

__all__ = [
    "MpcParams",
    "PredictionMatrices",
    "QpProblem",
    "QpSolution",
    "QpInfeasibleError",
    "build_prediction",
    "build_qp",
    "solve_qp",
    "MpcController",
]

HILDRETH_MAX_ITER = 500
HILDRETH_TOL = 1e-8


class QpInfeasibleError(Exception):
    """The constraint set admits no feasible increment vector."""


@dataclass(frozen=True)
class MpcParams:
    """Horizon, weighting and constraint settings.

    ``nu = None`` uses the full output horizon as control horizon.
    ``du_max`` is the per-sample increment bound, i.e. the continuous
    rate limit times the sampling period.
    """

    ts: float = 0.01
    ny: int = 120
    nu: int | None = None
    lam: float = 0.1
    u_max: float = 20.0
    du_max: float = 0.3

    def __post_init__(self):
        if not self.ts > 0:
            raise ValueError(f"ts must be positive, got {self.ts}")
        if self.ny < 1:
            raise ValueError(f"ny must be >= 1, got {self.ny}")
        nu = self.ny if self.nu is None else self.nu
        if not 1 <= nu <= self.ny:
            raise ValueError(f"need 1 <= nu <= ny, got nu={nu}, ny={self.ny}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not self.u_max > 0 or not self.du_max > 0:
            raise ValueError("u_max and du_max must be positive")

    @property
    def horizon_nu(self) -> int:
        return self.ny if self.nu is None else self.nu


@dataclass(frozen=True)
class PredictionMatrices:
    """Free-response map ``phi`` (Ny x n_aug) and increment map ``g`` (Ny x Nu)."""

    phi: np.ndarray
    g: np.ndarray


@dataclass(frozen=True)
class QpProblem:
    """Quadratic program over increments with box and cumulative bounds:

        min  0.5 du' H du + f' du
        s.t. |du_i| <= du_max
             |u_prev + sum_{j<=i} du_j| <= u_max   for all i
    """

    H: np.ndarray
    f: np.ndarray
    du_max: float
    u_max: float
    u_prev: float


@dataclass(frozen=True)
class QpSolution:
    du: np.ndarray
    iterations: int
    kkt_residual: float
    converged: bool


def build_prediction(model: DiscreteStateSpace, ny: int, nu: int) -> PredictionMatrices:
    """Condense ``model`` (SISO), augmented with the held input, over ``ny`` steps.

    The prediction state stacks the model state with the previously
    applied input, so predictions are driven purely by increments:
    ``y_pred = phi @ [x; u_prev] + g @ du``.
    """
    if nu > ny:
        raise ValueError(f"nu ({nu}) must not exceed ny ({ny})")
    if model.Bd.shape[1] != 1 or model.C.shape[0] != 1:
        raise ValueError("prediction model must be SISO")
    n = model.Ad.shape[0]
    a_bar = np.zeros((n + 1, n + 1))
    a_bar[:n, :n] = model.Ad
    a_bar[:n, n] = model.Bd[:, 0]
    a_bar[n, n] = 1.0
    b_bar = np.concatenate([model.Bd[:, 0], [1.0]])
    c_bar = np.concatenate([model.C[0], [0.0]])

    phi = np.empty((ny, n + 1))
    ak = a_bar.copy()
    for i in range(ny):
        phi[i] = c_bar @ ak
        ak = ak @ a_bar

    # Step response to a unit increment applied at k = 0 and held.
    step = np.empty(ny)
    z = b_bar.copy()
    for i in range(ny):
        step[i] = c_bar @ z
        z = a_bar @ z
    g = np.zeros((ny, nu))
    for j in range(nu):
        g[j:, j] = step[: ny - j]
    return PredictionMatrices(phi=phi, g=g)


def build_qp(
    pred: PredictionMatrices,
    x_aug: np.ndarray,
    r_traj: np.ndarray,
    u_prev: float,
    params: MpcParams,
) -> QpProblem:
    """Assemble the condensed QP for the current state and reference window."""
    x_aug = np.asarray(x_aug, dtype=float)
    r_traj = np.asarray(r_traj, dtype=float)
    ny, nu = pred.g.shape
    if r_traj.shape != (ny,):
        raise ValueError(f"r_traj must have shape ({ny},), got {r_traj.shape}")
    if x_aug.shape != (pred.phi.shape[1],):
        raise ValueError(f"x_aug must have shape ({pred.phi.shape[1]},)")
    H = 2.0 * (pred.g.T @ pred.g + params.lam * np.eye(nu))
    f = 2.0 * pred.g.T @ (pred.phi @ x_aug - r_traj)
    return QpProblem(H=H, f=f, du_max=params.du_max, u_max=params.u_max, u_prev=u_prev)


@njit(cache=True)
def _hildreth_sweeps(Hd, dHd, Kd, lam, max_iter, tol):
    """Gauss-Seidel ascent on the dual; returns (iterations, converged)."""
    m = Hd.shape[0]
    for it in range(1, max_iter + 1):
        delta = 0.0
        for i in range(m):
            s = Kd[i]
            for j in range(m):
                s += Hd[i, j] * lam[j]
            s -= dHd[i] * lam[i]
            w = -s / dHd[i]
            new = w if w > 0.0 else 0.0
            d = abs(new - lam[i])
            if d > delta:
                delta = d
            lam[i] = new
        if delta < tol:
            return it, True
    return max_iter, False


class _QpCache:
    """Constraint geometry and factorizations reused across solves."""

    def __init__(self, H: np.ndarray):
        H = np.asarray(H, dtype=float)
        nu = H.shape[0]
        if H.shape != (nu, nu) or not np.allclose(H, H.T, atol=1e-10):
            raise ValueError("H must be square symmetric")
        try:
            np.linalg.cholesky(H)
        except np.linalg.LinAlgError as exc:
            raise ValueError("H must be positive definite") from exc
        self.nu = nu
        self.H = H
        self.Hinv = np.linalg.inv(H)
        lower = np.tril(np.ones((nu, nu)))
        self.Mc = np.vstack([np.eye(nu), -np.eye(nu), lower, -lower])
        self.MHinv = self.Mc @ self.Hinv
        self.Hd = np.ascontiguousarray(self.MHinv @ self.Mc.T)
        self.dHd = np.ascontiguousarray(np.diag(self.Hd))

    def gamma(self, du_max: float, u_max: float, u_prev: float) -> np.ndarray:
        nu = self.nu
        out = np.empty(4 * nu)
        out[: 2 * nu] = du_max
        out[2 * nu : 3 * nu] = u_max - u_prev
        out[3 * nu :] = u_max + u_prev
        return out

    def candidate_rows(self, du_max: float, u_max: float, u_prev: float) -> np.ndarray:
        """All box rows plus the amplitude rows that could possibly violate.

        Given the box bounds, ``|sum_{j<=i} du_j| <= (i+1) du_max``; an
        amplitude row whose headroom exceeds that cannot bind, so it can
        be dropped without changing the optimum.
        """
        nu = self.nu
        reach = du_max * np.arange(1, nu + 1)
        hi = np.where(reach > u_max - u_prev)[0]
        lo = np.where(reach > u_max + u_prev)[0]
        return np.concatenate([np.arange(2 * nu), 2 * nu + hi, 3 * nu + lo])


def _qp_cost(H: np.ndarray, f: np.ndarray, du: np.ndarray) -> float:
    return float(0.5 * du @ H @ du + f @ du)


def _active_set_qp(
    H: np.ndarray,
    Hinv: np.ndarray,
    f: np.ndarray,
    M: np.ndarray,
    gamma: np.ndarray,
    max_iter: int,
    du0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Exact primal active-set solve of min 0.5 du'H du + f'du, M du <= gamma.

    Starts from the feasible point ``du0`` (zero when omitted) with the
    constraints tight there as initial working set, and terminates at
    the KKT point.  Rank-deficient working sets (the cumulative rows are
    nearly collinear when many are active) are handled through a
    null-space step and least-squares multipliers.
    """
    nu = H.shape[0]
    m = M.shape[0]
    du = np.zeros(nu) if du0 is None else du0.copy()
    on_bound = (gamma - M @ du) <= 1e-9
    active: list[int] = list(np.where(on_bound)[0])
    lam_w = np.empty(0)
    for it in range(1, max_iter + 1):
        g = H @ du + f
        if active:
            MW = M[active]
            null = scipy.linalg.null_space(MW)
            if null.shape[1] == 0:
                p = np.zeros(nu)
            else:
                reduced = null.T @ H @ null
                p = -null @ np.linalg.solve(reduced, null.T @ g)
        else:
            p = -Hinv @ g

        if np.linalg.norm(p, np.inf) <= 1e-11:
            if active:
                MW = M[active]
                lam_w, *_ = np.linalg.lstsq(MW.T, -g, rcond=None)
                j = int(np.argmin(lam_w))
                if lam_w[j] < -1e-9:
                    active.pop(j)
                    continue
            lam = np.zeros(m)
            if lam_w.size:
                lam[active] = np.maximum(lam_w, 0.0)
            return du, lam, it, True

        # Longest feasible step along p; add the blocking row if any.
        Mp = M @ p
        slack = gamma - M @ du
        mask = Mp > 1e-12
        if active:
            mask[active] = False
        alpha = 1.0
        blocker = -1
        if np.any(mask):
            ratios = slack[mask] / Mp[mask]
            j = int(np.argmin(ratios))
            if ratios[j] < alpha:
                alpha = float(ratios[j])
                blocker = int(np.where(mask)[0][j])
        du = du + max(alpha, 0.0) * p
        if blocker >= 0:
            active.append(blocker)
    lam = np.zeros(m)
    return du, lam, max_iter, False


def _project_feasible(du: np.ndarray, du_max: float, u_max: float, u_prev: float) -> np.ndarray:
    out = np.empty_like(du)
    u = u_prev
    for i, d in enumerate(du):
        d = max(-du_max, min(du_max, d))
        u_next = max(-u_max, min(u_max, u + d))
        out[i] = u_next - u
        u = u_next
    return out


def _solve_cached(
    cache: _QpCache,
    f: np.ndarray,
    du_max: float,
    u_max: float,
    u_prev: float,
    lam_full: np.ndarray | None,
    hildreth_budget: int = HILDRETH_MAX_ITER,
    du_warm: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Core solve; returns (du, full multipliers, iterations, converged).

    Hildreth's method runs first (warm-startable, and cheap whenever few
    constraints are active).  The condensed Hessian can be conditioned
    like 1e6+ on long horizons, where coordinate ascent would need on
    the order of the condition number in sweeps, so an exact primal
    active-set solve finishes the job whenever Hildreth hits its budget.
    """
    nu = cache.nu
    if abs(u_prev) > u_max + 1e-9:
        raise QpInfeasibleError(
            f"|u_prev| = {abs(u_prev):.6g} exceeds u_max = {u_max:.6g}; no feasible increment"
        )
    gamma = cache.gamma(du_max, u_max, u_prev)
    du_free = -cache.Hinv @ f
    rows = cache.candidate_rows(du_max, u_max, u_prev)
    if np.all(cache.Mc[rows] @ du_free <= gamma[rows] + 1e-12):
        return du_free, np.zeros(4 * nu), 0, True

    iters = 0
    if hildreth_budget > 0:
        lam = np.zeros(len(rows)) if lam_full is None else lam_full[rows].copy()
        Hd = np.ascontiguousarray(cache.Hd[np.ix_(rows, rows)])
        dHd = np.ascontiguousarray(Hd.diagonal())
        Kd = gamma[rows] + cache.MHinv[rows] @ f
        iters, converged = _hildreth_sweeps(Hd, dHd, Kd, lam, hildreth_budget, HILDRETH_TOL)
        if converged:
            du = -cache.Hinv @ (f + cache.Mc[rows].T @ lam)
            if np.max(cache.Mc[rows] @ du - gamma[rows]) <= 1e-8:
                lam_out = np.zeros(4 * nu)
                lam_out[rows] = lam
                return du, lam_out, iters, True

    du0 = None if du_warm is None else _project_feasible(du_warm, du_max, u_max, u_prev)
    du, lam_rows, as_iters, converged = _active_set_qp(
        cache.H, cache.Hinv, f, cache.Mc[rows], gamma[rows], max_iter=8 * nu + 40, du0=du0
    )
    iters += as_iters
    if not converged:
        # Out of budget: fall back to the cheapest feasible candidate.
        candidates = [
            _project_feasible(du, du_max, u_max, u_prev),
            _project_feasible(du_free, du_max, u_max, u_prev),
            np.zeros(nu),
        ]
        du = min(candidates, key=lambda d: _qp_cost(cache.H, f, d))
    lam_out = np.zeros(4 * nu)
    lam_out[rows] = lam_rows
    return du, lam_out, iters, converged


def _kkt_residual(cache: _QpCache, f, du, lam_full, gamma) -> float:
    grad = cache.H @ du + f + cache.Mc.T @ lam_full
    slack = gamma - cache.Mc @ du
    viol = max(0.0, float(-slack.min()))
    comp = float(np.max(np.abs(lam_full * slack))) if lam_full.size else 0.0
    return max(float(np.linalg.norm(grad, np.inf)), viol, comp)


def solve_qp(prob: QpProblem, lam0: np.ndarray | None = None) -> QpSolution:
    """Solve the increment QP with Hildreth's dual method.

    When no constraint is active the result equals the unconstrained
    solve ``-H^-1 f``.  If the iteration cap is reached the best feasible
    iterate is returned with ``converged=False``.
    """
    cache = _QpCache(prob.H)
    f = np.asarray(prob.f, dtype=float)
    if f.shape != (cache.nu,):
        raise ValueError(f"f must have shape ({cache.nu},), got {f.shape}")
    du, lam_full, iters, converged = _solve_cached(
        cache, f, prob.du_max, prob.u_max, prob.u_prev, lam0
    )
    gamma = cache.gamma(prob.du_max, prob.u_max, prob.u_prev)
    return QpSolution(
        du=du,
        iterations=iters,
        kkt_residual=_kkt_residual(cache, f, du, lam_full, gamma),
        converged=converged,
    )


class MpcController:
    """Receding-horizon tracker applying the first increment each tick.

    The dual multipliers are warm-started from the previous tick (shifted
    one sample); warm starting changes iteration counts, not solutions.
    """

    def __init__(
        self,
        plant: StateSpace,
        params: MpcParams | None = None,
        actuator: ActuatorParams | None = None,
        include_actuator_lag: bool = True,
        preview: bool = False,
    ):
        self.params = params or MpcParams()
        self.preview = preview
        self.include_actuator_lag = include_actuator_lag and actuator is not None

        if self.include_actuator_lag:
            n = plant.n_states
            a = np.zeros((n + 1, n + 1))
            a[:n, :n] = plant.A
            a[:n, n] = plant.B[:, 0]
            a[n, n] = -1.0 / actuator.tau
            b = np.zeros((n + 1, 1))
            b[n, 0] = 1.0 / actuator.tau
            c = np.concatenate([plant.C[0], [0.0]]).reshape(1, -1)
            model = StateSpace(A=a, B=b, C=c)
        else:
            model = plant
        self.model_d = zoh_discretize(model, self.params.ts)
        nu = self.params.horizon_nu
        self.pred = build_prediction(self.model_d, self.params.ny, nu)
        self._cache = _QpCache(2.0 * (self.pred.g.T @ self.pred.g + self.params.lam * np.eye(nu)))
        self._gt2 = 2.0 * self.pred.g.T
        self._lam = np.zeros(4 * nu)
        self._plan = np.zeros(nu)
        self.u_prev = 0.0
        self.last_solution: QpSolution | None = None

    def _x_aug(self, meas: Measurement) -> np.ndarray:
        if self.include_actuator_lag:
            return np.concatenate([meas.x_p, [meas.u_ac, self.u_prev]])
        return np.concatenate([meas.x_p, [self.u_prev]])

    def _reference_window(self, t: float, r: float, r_at) -> np.ndarray:
        p = self.params
        if self.preview and r_at is not None:
            return np.array([r_at(t + (i + 1) * p.ts) for i in range(p.ny)])
        return np.full(p.ny, r)

    # Short warm-started Hildreth attempt per tick; the exact active-set
    # stage inside the solve covers the ill-conditioned transients.
    HILDRETH_TICK_BUDGET = 25

    def compute(self, t: float, r: float, meas: Measurement, r_at=None) -> float:
        p = self.params
        f = self._gt2 @ (self.pred.phi @ self._x_aug(meas) - self._reference_window(t, r, r_at))
        du, lam_full, iters, converged = _solve_cached(
            self._cache, f, p.du_max, p.u_max, self.u_prev, self._lam,
            hildreth_budget=self.HILDRETH_TICK_BUDGET,
            du_warm=self._plan,
        )
        gamma = self._cache.gamma(p.du_max, p.u_max, self.u_prev)
        self.last_solution = QpSolution(
            du=du,
            iterations=iters,
            kkt_residual=_kkt_residual(self._cache, f, du, lam_full, gamma),
            converged=converged,
        )
        nu = self._cache.nu
        shifted = np.zeros_like(lam_full)
        for b in range(4):
            shifted[b * nu : b * nu + nu - 1] = lam_full[b * nu + 1 : (b + 1) * nu]
        self._lam = shifted
        self._plan = np.concatenate([du[1:], [0.0]])

        du0 = max(-p.du_max, min(p.du_max, float(du[0])))
        u_c = max(-p.u_max, min(p.u_max, self.u_prev + du0))
        self.u_prev = u_c
        return u_c

    def notify_actuation(self, u_c: float, u_ac: float) -> None:
        pass
