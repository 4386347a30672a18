"""Dense linear-algebra helpers for small state-space control problems.

Everything here operates on plain ``numpy`` arrays treated as matrices in
row-major semantic order.  The routines cover exactly what the rest of the
package needs: matrix exponentials, zero-order-hold discretization,
continuous algebraic Riccati solutions (and the LQI gain split built on
them), and a Routh-Hurwitz stability test for systems up to fourth order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "Tolerances",
    "TOL",
    "StateSpace",
    "DiscreteStateSpace",
    "RiccatiSolution",
    "ControlMathError",
    "DimensionError",
    "ConvergenceError",
    "StabilizabilityError",
    "mat_exp",
    "zoh_discretize",
    "solve_care",
    "lqi_augment",
    "lqi_gains",
    "char_poly",
    "is_hurwitz",
]


class ControlMathError(Exception):
    """Base class for numerical-synthesis failures."""


class DimensionError(ControlMathError):
    """Operands have inconsistent or unsupported dimensions."""


class ConvergenceError(ControlMathError):
    """An iterative solve did not reach its tolerance."""

    def __init__(self, message: str, residual: float = float("inf")):
        super().__init__(message)
        self.residual = residual


class StabilizabilityError(ControlMathError):
    """The designed closed loop is not asymptotically stable."""


@dataclass(frozen=True)
class Tolerances:
    """Fixed numeric tolerances used across the synthesis routines."""

    mat_exp_scale_norm: float = 0.5      # max inf-norm after scaling
    mat_exp_term: float = 1e-16          # series truncation threshold
    care_residual: float = 1e-8          # Frobenius norm of the CARE residual
    symmetry: float = 1e-10              # max asymmetry tolerated in P


TOL = Tolerances()


def _as_matrix(m, name: str) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"{name} must be a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ControlMathError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class StateSpace:
    """Continuous-time linear model  dx/dt = A x + B u,  y = C x."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise DimensionError(f"C must have {n} columns, got {C.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class DiscreteStateSpace:
    """Zero-order-hold model  x[k+1] = Ad x[k] + Bd u[k],  y = C x."""

    Ad: np.ndarray
    Bd: np.ndarray
    C: np.ndarray
    Ts: float

    def __post_init__(self):
        Ad = _as_matrix(self.Ad, "Ad")
        Bd = _as_matrix(self.Bd, "Bd")
        C = _as_matrix(self.C, "C")
        n = Ad.shape[0]
        if Ad.shape != (n, n) or Bd.shape[0] != n or C.shape[1] != n:
            raise DimensionError("inconsistent discrete model dimensions")
        if not self.Ts > 0:
            raise ControlMathError(f"Ts must be positive, got {self.Ts}")
        object.__setattr__(self, "Ad", Ad)
        object.__setattr__(self, "Bd", Bd)
        object.__setattr__(self, "C", C)


@dataclass(frozen=True)
class RiccatiSolution:
    """Cost-to-go matrix P, state-feedback gain K and the CARE residual."""

    P: np.ndarray
    K: np.ndarray
    residual: float


def mat_exp(M) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring of a truncated series.

    The input is scaled by 2**-s until its inf-norm is at most 0.5, the
    Taylor series is summed until terms fall below 1e-16, and the result
    is squared s times.  Relative error is well below 1e-12 for the
    moderate norms (inf-norm <= 10) this package produces.
    """
    A = _as_matrix(M, "M")
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"mat_exp needs a square matrix, got {A.shape}")

    norm = np.linalg.norm(A, np.inf)
    s = 0
    while norm / (2 ** s) > TOL.mat_exp_scale_norm:
        s += 1
    As = A / (2 ** s)

    result = np.eye(n)
    term = np.eye(n)
    k = 1
    while True:
        term = term @ As / k
        result = result + term
        if np.linalg.norm(term, np.inf) <= TOL.mat_exp_term:
            break
        k += 1
        if k > 60:  # unreachable for scaled norms <= 0.5; guards bad input
            raise ConvergenceError("matrix exponential series did not converge")

    for _ in range(s):
        result = result @ result
    return result


def zoh_discretize(sys: StateSpace, Ts: float) -> DiscreteStateSpace:
    """Discretize ``sys`` under a zero-order hold of length ``Ts``.

    Uses the augmented-matrix exponential
    ``exp([[A, B], [0, 0]] * Ts) = [[Ad, Bd], [0, I]]``.
    """
    if not Ts > 0:
        raise ControlMathError(f"Ts must be positive, got {Ts}")
    n, m = sys.n_states, sys.n_inputs
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = sys.A * Ts
    aug[:n, n:] = sys.B * Ts
    E = mat_exp(aug)
    return DiscreteStateSpace(Ad=E[:n, :n], Bd=E[:n, n:], C=sys.C.copy(), Ts=Ts)


def solve_care(A, B, Q, R) -> RiccatiSolution:
    """Solve A'P + PA - P B R^-1 B' P + Q = 0 and return P, K = R^-1 B' P.

    The solution is symmetrized and validated: the CARE residual must be
    below ``TOL.care_residual`` in Frobenius norm and the closed loop
    A - B K must be Hurwitz (checked with the Routh-Hurwitz test for
    n <= 4, by eigenvalues otherwise).
    """
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    Q = _as_matrix(Q, "Q")
    R = _as_matrix(R, "R")
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or Q.shape != (n, n):
        raise DimensionError("CARE operand dimensions are inconsistent")
    m = B.shape[1]
    if R.shape != (m, m):
        raise DimensionError(f"R must be {m}x{m}, got {R.shape}")

    try:
        P = scipy.linalg.solve_continuous_are(A, B, Q, R)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"CARE solve failed: {exc}") from exc

    P = 0.5 * (P + P.T)
    K = np.linalg.solve(R, B.T @ P)
    residual = float(np.linalg.norm(A.T @ P + P @ A - P @ B @ K + Q, "fro"))
    if not np.isfinite(residual) or residual > TOL.care_residual:
        raise ConvergenceError(
            f"CARE residual {residual:.3e} exceeds {TOL.care_residual:.1e}",
            residual=residual,
        )

    Acl = A - B @ K
    if n <= 4:
        stable = is_hurwitz(Acl)
    else:
        stable = bool(np.max(np.linalg.eigvals(Acl).real) < 0)
    if not stable:
        raise StabilizabilityError("closed loop A - B K is not Hurwitz")
    return RiccatiSolution(P=P, K=K, residual=residual)


def lqi_augment(plant: StateSpace) -> tuple[np.ndarray, np.ndarray]:
    """Plant augmented with an integral-of-error state placed first:

        d/dt [e_I; x] = [[0, -C], [0, A]] [e_I; x] + [0; B] u
    """
    if plant.n_inputs != 1 or plant.C.shape[0] != 1:
        raise DimensionError("integral augmentation requires a SISO plant")
    n = plant.n_states
    A_aug = np.zeros((n + 1, n + 1))
    A_aug[0, 1:] = -plant.C[0]
    A_aug[1:, 1:] = plant.A
    B_aug = np.zeros((n + 1, 1))
    B_aug[1:, 0] = plant.B[:, 0]
    return A_aug, B_aug


def lqi_gains(plant: StateSpace, Q, R) -> tuple[float, np.ndarray]:
    """LQ gains for the integral-augmented plant.

    The returned pair is ``(K_I, K_xp)``: the first entry of the Riccati
    gain and the remaining row acting on the plant state.  Note the sign
    convention: the regulator law is ``u = -K [e_I; x]``, so a tracking
    implementation feeds back ``-K_I`` on the integral of the error.
    """
    n = plant.n_states
    Q = _as_matrix(Q, "Q")
    if Q.shape != (n + 1, n + 1):
        raise DimensionError(f"Q must be {(n + 1, n + 1)}, got {Q.shape}")
    A_aug, B_aug = lqi_augment(plant)
    sol = solve_care(A_aug, B_aug, Q, R)
    K = sol.K[0]
    return float(K[0]), K[1:].copy()


def char_poly(M: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial coefficients via Faddeev-LeVerrier.

    Returns ``[1, c1, ..., cn]`` with det(sI - M) = s^n + c1 s^(n-1) + ... + cn.
    """
    A = _as_matrix(M, "M")
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError("char_poly needs a square matrix")
    coeffs = np.empty(n + 1)
    coeffs[0] = 1.0
    Mk = np.zeros((n, n))
    for k in range(1, n + 1):
        Mk = A @ (Mk + coeffs[k - 1] * np.eye(n)) if k > 1 else A.copy()
        coeffs[k] = -np.trace(Mk) / k
    return coeffs


def is_hurwitz(M) -> bool:
    """Routh-Hurwitz test: True iff all eigenvalues of M have Re < 0.

    Supports matrices up to 4x4; larger systems raise ``DimensionError``.
    Rows of the Routh array with a zero leading entry are treated as not
    Hurwitz (roots on or right of the imaginary axis).
    """
    A = _as_matrix(M, "M")
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError("is_hurwitz needs a square matrix")
    if n > 4:
        raise DimensionError(f"is_hurwitz supports n <= 4, got n = {n}")

    c = char_poly(A)
    # Necessary condition: every coefficient strictly positive.
    if np.any(c <= 0):
        return False

    # Routh array; c[0] = 1 so the first two rows are well defined.
    row_prev = c[0::2].astype(float)
    row_curr = c[1::2].astype(float)
    width = len(row_prev)
    row_curr = np.pad(row_curr, (0, width - len(row_curr)))
    for _ in range(n - 1):
        if row_curr[0] <= 0:
            return False
        nxt = np.zeros(width)
        for j in range(width - 1):
            nxt[j] = (row_curr[0] * row_prev[j + 1] - row_prev[0] * row_curr[j + 1]) / row_curr[0]
        row_prev, row_curr = row_curr, nxt
    return bool(row_curr[0] > 0)
