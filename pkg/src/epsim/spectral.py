"""Dense complex eigensolver front end and exceptional-point diagnostics.

The eigensolver contract (Hessenberg reduction followed by shifted-QR
iteration to Schur form, eigenvectors by back-substitution) is fulfilled by
LAPACK's zgeev through numpy; this module adds the residual guarantee,
failure reporting, eigenvalue clustering and the eigenvector-coalescence
metric used to locate exceptional points on parameter grids.

Norms are Frobenius throughout.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import EigenConvergenceError, MatrixExpOverflowError

DEFAULT_RESIDUAL_TOL = 1e-9
DEFAULT_ANGLE_EPS = 1e-3
CLUSTER_EPS_SCALE = 1e-6


@dataclass
class Spectrum:
    """Result of one diagonalization.

    eigenvectors (unit-norm right eigenvectors, one per column) and residuals
    ||A v - lambda v|| align index-wise with eigenvalues.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None
    residuals: np.ndarray | None = None
    norm: float = 0.0


def eig(
    a: np.ndarray, want_vectors: bool = True, tol: float = DEFAULT_RESIDUAL_TOL
) -> Spectrum:
    """All eigenvalues (and right eigenvectors) of a dense complex matrix."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    norm = float(np.linalg.norm(a))
    if not want_vectors:
        try:
            values = np.linalg.eigvals(a)
        except np.linalg.LinAlgError as exc:
            raise EigenConvergenceError(
                f"eigvals failed for dim={a.shape[0]}, norm={norm:.3e}: {exc}"
            ) from exc
        return Spectrum(eigenvalues=values, norm=norm)
    try:
        values, vectors = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(
            f"eig failed for dim={a.shape[0]}, norm={norm:.3e}: {exc}"
        ) from exc
    vectors = vectors / np.linalg.norm(vectors, axis=0, keepdims=True)
    residuals = np.linalg.norm(a @ vectors - vectors * values[None, :], axis=0)
    bound = tol * max(norm, np.finfo(float).tiny)
    if np.any(residuals > bound):
        worst = int(np.argmax(residuals))
        raise EigenConvergenceError(
            f"residual bound violated: pair {worst} has ||Av - lv|| = "
            f"{residuals[worst]:.3e} > {bound:.3e} (dim={a.shape[0]})"
        )
    return Spectrum(values, vectors, residuals, norm)


def mat_exp(a: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a Pade approximant.

    Exact on (exactly) diagonal matrices. Raises with a norm report when the
    result overflows.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if np.count_nonzero(a - np.diag(np.diag(a))) == 0:
        return np.diag(np.exp(np.diag(a)))
    with np.errstate(over="ignore", invalid="ignore"):
        result = scipy.linalg.expm(a)
    if not np.all(np.isfinite(result)):
        raise MatrixExpOverflowError(
            f"exp overflowed: ||A||_F = {np.linalg.norm(a):.3e}, "
            f"max Re(diag) = {np.max(a.diagonal().real):.3e}"
        )
    return result


def principal_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Angle in [0, pi/2] between the one-dimensional spans of u and v.

    Near-parallel spans are resolved through the projection residual
    (sin of the angle), which stays accurate where arccos of the overlap
    saturates at sqrt(machine eps).
    """
    u = np.asarray(u) / np.linalg.norm(u)
    v = np.asarray(v) / np.linalg.norm(v)
    inner = np.vdot(u, v)
    cos_angle = min(1.0, abs(inner))
    if cos_angle < 0.7:
        return float(np.arccos(cos_angle))
    residual = v - u * inner
    return float(np.arcsin(min(1.0, np.linalg.norm(residual))))


def cluster_eigenvalues(values: np.ndarray, eps: float) -> list[list[int]]:
    """Group indices whose eigenvalues chain-link within distance eps."""
    n = len(values)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.argsort(values.real, kind="stable")
    for pos, i in enumerate(order):
        for j in order[pos + 1 :]:
            if values[j].real - values[i].real > eps:
                break
            if abs(values[i] - values[j]) <= eps:
                parent[find(int(i))] = find(int(j))
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda grp: (values[grp[0]].real, grp[0]))


@dataclass
class EigenvalueCluster:
    indices: tuple[int, ...]
    eigenvalues: np.ndarray
    min_angle: float | None  # None for singleton clusters


@dataclass
class CoalescenceReport:
    """Cluster/angle diagnostics of one grid point of a parameter scan."""

    param: float
    clusters: list[EigenvalueCluster] = field(default_factory=list)
    min_angle: float = np.inf  # over clusters of size >= 2
    coalescing: bool = False
    error: str | None = None


def coalescence_report(
    a: np.ndarray,
    param: float,
    cluster_eps: float | None = None,
    angle_eps: float = DEFAULT_ANGLE_EPS,
) -> CoalescenceReport:
    spectrum = eig(a, want_vectors=True)
    eps = CLUSTER_EPS_SCALE * spectrum.norm if cluster_eps is None else cluster_eps
    clusters = []
    min_angle = np.inf
    for group in cluster_eigenvalues(spectrum.eigenvalues, eps):
        angle = None
        if len(group) >= 2:
            angle = min(
                principal_angle(
                    spectrum.eigenvectors[:, i], spectrum.eigenvectors[:, j]
                )
                for pos, i in enumerate(group)
                for j in group[pos + 1 :]
            )
            min_angle = min(min_angle, angle)
        clusters.append(
            EigenvalueCluster(tuple(group), spectrum.eigenvalues[group], angle)
        )
    return CoalescenceReport(
        param=param,
        clusters=clusters,
        min_angle=min_angle,
        coalescing=bool(min_angle < angle_eps),
    )


def worker_count() -> int:
    """Parallelism level, controlled by the EPSIM_WORKERS environment variable."""
    try:
        return max(1, int(os.environ.get("EPSIM_WORKERS", "1")))
    except ValueError:
        return 1


def coalescence_scan(
    builder: Callable[[float], np.ndarray],
    grid: Sequence[float],
    cluster_eps: float | None = None,
    angle_eps: float = DEFAULT_ANGLE_EPS,
    workers: int | None = None,
) -> list[CoalescenceReport]:
    """One CoalescenceReport per grid point, in grid order.

    Eigensolver failures at individual points are recorded on the report and
    do not abort the scan. Grid points may be evaluated concurrently; the
    result order is always the grid order.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted ascending")

    def one(x: float) -> CoalescenceReport:
        try:
            return coalescence_report(builder(x), x, cluster_eps, angle_eps)
        except EigenConvergenceError as exc:
            return CoalescenceReport(param=x, error=str(exc))

    workers = worker_count() if workers is None else workers
    if workers <= 1:
        return [one(x) for x in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, grid))


@dataclass
class EPEstimate:
    value: float
    uncertainty: float
    min_angle: float
    eigenvalue: complex


def estimate_ep(
    reports: Sequence[CoalescenceReport], grid_step: float
) -> EPEstimate | None:
    """Grid point minimizing the clustered eigenvector angle, +- one grid step."""
    best = None
    for report in reports:
        if report.error is not None or not np.isfinite(report.min_angle):
            continue
        if best is None or report.min_angle < best.min_angle:
            cluster = min(
                (c for c in report.clusters if c.min_angle is not None),
                key=lambda c: c.min_angle,
            )
            best = EPEstimate(
                value=report.param,
                uncertainty=grid_step,
                min_angle=report.min_angle,
                eigenvalue=complex(np.mean(cluster.eigenvalues)),
            )
    return best
