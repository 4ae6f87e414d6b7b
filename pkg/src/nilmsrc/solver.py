"""Sparse recovery solvers over a column dictionary.

Recovers a coefficient vector ``alpha`` with ``y ~ D @ alpha`` and few
nonzeros, either by greedy pursuit (OMP) or by l1-penalised proximal
gradient descent (ISTA / FISTA).  A brute-force support enumerator is
included as an exact oracle for small problems.

All solvers are pure functions of their inputs; a normalised
``DesignMatrix`` is immutable, so concurrent callers are safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DimensionMismatch, OracleTooLarge, UsageError, ZeroColumn

METHODS = ("omp", "ista", "fista")

ZERO_COLUMN_TOL = 1e-12


@dataclass(frozen=True)
class DesignMatrix:
    """Dictionary of unit-norm columns plus the norms they were scaled by.

    ``entries`` is m x n with every column at unit Euclidean norm;
    ``column_norms`` holds the original norm of each column so callers can
    undo the scaling.
    """

    entries: np.ndarray
    column_norms: np.ndarray

    def __post_init__(self):
        if self.entries.ndim != 2 or min(self.entries.shape) < 1:
            raise DimensionMismatch(
                f"design matrix must be 2-d and non-empty, got shape {self.entries.shape}"
            )
        if self.column_norms.shape != (self.entries.shape[1],):
            raise DimensionMismatch("column_norms length must equal column count")

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class SparseCode:
    """Solver output: coefficients, the achieved residual norm, and
    diagnostic flags ("singular_subproblem", "non_convergence")."""

    coefficients: np.ndarray
    residual_norm: float
    iterations_used: int
    flags: tuple = ()

    def support(self):
        """Indices of the nonzero coefficients."""
        return tuple(int(i) for i in np.nonzero(self.coefficients)[0])


@dataclass
class SolverConfig:
    """Settings shared by all solvers.

    ``lam`` and ``tolerance`` default to ``None`` meaning "auto": the l1
    weight becomes 0.1 * max|D^T y| and the stopping tolerance becomes
    1e-6 * ||y||_2 for OMP or 1e-8 relative objective change for
    ISTA/FISTA, resolved per solve.
    """

    method: str = "omp"
    max_sparsity: int = 10
    lam: float | None = None
    max_iterations: int = 500
    tolerance: float | None = None

    def __post_init__(self):
        self.method = str(self.method).lower()
        if self.method not in METHODS:
            raise UsageError(f"unknown solver method {self.method!r}; expected one of {METHODS}")
        if self.max_sparsity < 1:
            raise UsageError("max_sparsity must be a positive integer")
        if self.max_iterations < 1:
            raise UsageError("max_iterations must be a positive integer")
        if self.lam is not None and self.lam < 0:
            raise UsageError("lambda must be nonnegative")
        if self.tolerance is not None and self.tolerance < 0:
            raise UsageError("tolerance must be nonnegative")


def normalize_columns(raw) -> DesignMatrix:
    """Scale every column of ``raw`` to unit Euclidean norm.

    Raises ZeroColumn if any column norm falls below 1e-12; original norms
    are preserved in ``column_norms``.
    """
    mat = np.array(raw, dtype=float)
    if mat.ndim != 2 or min(mat.shape) < 1:
        raise DimensionMismatch(f"expected a non-empty 2-d matrix, got shape {mat.shape}")
    norms = np.linalg.norm(mat, axis=0)
    small = np.nonzero(norms < ZERO_COLUMN_TOL)[0]
    if small.size:
        raise ZeroColumn(int(small[0]))
    entries = mat / norms
    entries.setflags(write=False)
    norms.setflags(write=False)
    return DesignMatrix(entries=entries, column_norms=norms)


def _check_signal(D: DesignMatrix, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.size != D.entries.shape[0]:
        raise DimensionMismatch(
            f"signal length {y.size} != matrix row count {D.entries.shape[0]}"
        )
    if not np.all(np.isfinite(y)):
        raise DimensionMismatch("signal contains non-finite values")
    return y


def soft_threshold(x, t):
    """Element-wise prox of t*||.||_1: sign(x) * max(|x| - t, 0)."""
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _largest_eigenvalue(gram, tol=1e-12, max_iter=1000):
    """Largest eigenvalue of a PSD matrix by power iteration.

    Deterministic fixed-seed start so repeated solves agree bitwise.
    """
    n = gram.shape[0]
    v = np.random.default_rng(12345).standard_normal(n)
    v /= np.linalg.norm(v)
    lam_prev = 0.0
    lam = 0.0
    for _ in range(max_iter):
        w = gram @ v
        wn = float(np.linalg.norm(w))
        if wn == 0.0:
            return 0.0
        v = w / wn
        lam = float(v @ (gram @ v))
        if abs(lam - lam_prev) <= tol * max(1.0, abs(lam)):
            break
        lam_prev = lam
    return lam


def solve_omp(D: DesignMatrix, y, cfg: SolverConfig | None = None, iteration_hook=None) -> SparseCode:
    """Orthogonal matching pursuit with least-squares refit on the support.

    Stops when the residual norm drops to the tolerance or the support
    reaches ``max_sparsity`` (clamped to min(m, n)).  Equal correlations
    resolve to the lowest column index; rank-deficient subproblems fall
    back to the minimum-norm least-squares solution and are flagged.

    ``iteration_hook(iteration, support, residual_norm)`` is called after
    every refit; tests use it to assert monotonic residual decrease.
    """
    cfg = cfg or SolverConfig()
    y = _check_signal(D, y)
    A = D.entries
    m, n = A.shape
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-6 * float(np.linalg.norm(y))
    kmax = min(cfg.max_sparsity, m, n)

    coefficients = np.zeros(n)
    residual = y.copy()
    rnorm = float(np.linalg.norm(residual))
    support: list[int] = []
    available = np.ones(n, dtype=bool)
    flags: list[str] = []
    solution = None
    iterations = 0

    while rnorm > tol and len(support) < kmax:
        corr = np.abs(A.T @ residual)
        corr[~available] = -1.0
        best = int(np.argmax(corr))
        if corr[best] <= 1e-13 * max(rnorm, 1.0):
            break  # residual orthogonal to every remaining column
        support.append(best)
        available[best] = False
        sub = A[:, support]
        solution, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
        if rank < len(support) and "singular_subproblem" not in flags:
            flags.append("singular_subproblem")
        residual = y - sub @ solution
        rnorm = float(np.linalg.norm(residual))
        iterations += 1
        if iteration_hook is not None:
            iteration_hook(iterations, tuple(support), rnorm)

    if support:
        coefficients[support] = solution
    return SparseCode(coefficients, rnorm, iterations, tuple(flags))


def solve_l1(D: DesignMatrix, y, cfg: SolverConfig | None = None, iteration_hook=None) -> SparseCode:
    """Minimise 0.5*||y - D a||^2 + lam*||a||_1 by ISTA or FISTA.

    The gradient step is 1/L with L the largest eigenvalue of D^T D from
    power iteration (inflated by 1e-6 relative so the descent step never
    exceeds 1/L).  Starts from the zero vector; stops on relative
    objective change <= tolerance.  Hitting the iteration budget first
    sets the "non_convergence" flag instead of raising.

    ``iteration_hook(iteration, objective)`` is called once per iteration.
    """
    cfg = cfg or SolverConfig(method="ista")
    if cfg.method not in ("ista", "fista"):
        raise UsageError(f"solve_l1 requires method 'ista' or 'fista', got {cfg.method!r}")
    y = _check_signal(D, y)
    A = D.entries
    n = A.shape[1]

    corr0 = A.T @ y
    lam = cfg.lam if cfg.lam is not None else 0.1 * float(np.max(np.abs(corr0)))
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-8

    gram = A.T @ A
    lipschitz = _largest_eigenvalue(gram) * (1.0 + 1e-6)
    if lipschitz <= 0.0:
        lipschitz = 1.0
    step = 1.0 / lipschitz

    def objective(a):
        return 0.5 * float(np.sum((y - A @ a) ** 2)) + lam * float(np.sum(np.abs(a)))

    x = np.zeros(n)
    obj = objective(x)
    accel = cfg.method == "fista"
    z = x
    t = 1.0
    iterations = 0
    converged = False

    for k in range(1, cfg.max_iterations + 1):
        point = z if accel else x
        x_new = soft_threshold(point - step * (gram @ point - corr0), lam * step)
        if accel:
            t_new = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        obj_new = objective(x_new)
        rel_change = abs(obj - obj_new) / max(obj, 1e-30)
        x = x_new
        obj = obj_new
        iterations = k
        if iteration_hook is not None:
            iteration_hook(k, obj_new)
        if rel_change <= tol:
            converged = True
            break

    flags = () if converged else ("non_convergence",)
    rnorm = float(np.linalg.norm(y - A @ x))
    return SparseCode(x, rnorm, iterations, flags)


def solve(D: DesignMatrix, y, cfg: SolverConfig | None = None, iteration_hook=None) -> SparseCode:
    """Dispatch to solve_omp or solve_l1 according to ``cfg.method``."""
    cfg = cfg or SolverConfig()
    if cfg.method == "omp":
        return solve_omp(D, y, cfg, iteration_hook)
    return solve_l1(D, y, cfg, iteration_hook)


def brute_force_sparse(D: DesignMatrix, y, k: int) -> SparseCode:
    """Exact minimiser of ||y - D a||_2 over all supports of size <= k.

    Test oracle: enumerates supports in lexicographic order and keeps the
    first one achieving the smallest residual, so ties resolve to the
    lexicographically smallest support.  Guarded to n <= 20, k <= 3;
    ``k >= n`` needs no enumeration (full least squares dominates) and
    bypasses the guard.
    """
    y = _check_signal(D, y)
    A = D.entries
    n = A.shape[1]
    if k < 1:
        raise UsageError("k must be a positive integer")

    if k >= n:
        solution, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
        rnorm = float(np.linalg.norm(y - A @ solution))
        return SparseCode(solution, rnorm, 1, ())

    if n > 20 or k > 3:
        raise OracleTooLarge(f"refusing to enumerate supports for n={n}, k={k} (guard: n <= 20, k <= 3)")

    supports = [()]
    for size in range(1, k + 1):
        supports.extend(combinations(range(n), size))
    supports.sort()

    best_rnorm = float(np.linalg.norm(y))  # empty support
    best_support: tuple = ()
    best_solution = np.zeros(0)
    for sup in supports[1:]:
        sub = A[:, sup]
        solution, _, _, _ = np.linalg.lstsq(sub, y, rcond=None)
        rnorm = float(np.linalg.norm(y - sub @ solution))
        if rnorm < best_rnorm:
            best_rnorm = rnorm
            best_support = sup
            best_solution = solution

    coefficients = np.zeros(n)
    if best_support:
        coefficients[list(best_support)] = best_solution
    return SparseCode(coefficients, best_rnorm, len(supports), ())


def residual_norm(D: DesignMatrix, y, coefficients) -> float:
    """Euclidean norm of y - D @ coefficients."""
    y = _check_signal(D, y)
    coefficients = np.asarray(coefficients, dtype=float).ravel()
    if coefficients.size != D.entries.shape[1]:
        raise DimensionMismatch(
            f"coefficient length {coefficients.size} != column count {D.entries.shape[1]}"
        )
    return float(np.linalg.norm(y - D.entries @ coefficients))
