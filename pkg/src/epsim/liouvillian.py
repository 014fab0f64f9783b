"""Liouvillian superoperator assembly and first-moment dynamics.

Vectorization is column-stacking throughout: vec(rho) stacks columns
(Fortran-order ravel), so vec(A rho B) = (B^T kron A) vec(rho).

The first-moment dynamical matrix M = [[-i*ga, g], [g, -i*gb]] generates
d/dt [<a>, <b>] = -i M v - [eps, eps]; its degeneracy at g = kappa defines
the coalescence of the full dissipative dynamics, independently of the
thermal photon number (the n-dependent terms cancel in the first moments).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fockspace as fs
from . import model as md
from . import spectral as sp
from .errors import InvalidDensityMatrixError, SpectrumWitnessError
from .fockspace import FockCutoff, Mode


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(rho, dtype=complex).ravel(order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise ValueError(f"length {v.size} is not a perfect square")
    return v.reshape((dim, dim), order="F")


def left_mult(x: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> x @ rho."""
    return np.kron(np.eye(x.shape[0], dtype=complex), x)


def right_mult(x: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> rho @ x."""
    return np.kron(x.T, np.eye(x.shape[0], dtype=complex))


@dataclass
class Superoperator:
    """Dense matrix form of a superoperator acting on vec(rho)."""

    matrix: np.ndarray
    hilbert_dim: int
    convention: str = "column-stacking"

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho))


def build_liouvillian(params: md.SystemParams, cutoff: FockCutoff | int) -> Superoperator:
    """Lindblad generator: -i[H, .] plus the dissipators of the collapse set."""
    cut = FockCutoff.of(cutoff)
    h = md.build_hamiltonian(params, cut)
    gen = -1j * (left_mult(h) - right_mult(h))
    for c in md.build_collapse_ops(params, cut):
        cdc = fs.dagger(c) @ c
        gen += np.kron(c.conj(), c) - 0.5 * (left_mult(cdc) + right_mult(cdc))
    return Superoperator(gen, cut.dim)


def build_liouvillian_from_hnh(
    params: md.SystemParams, cutoff: FockCutoff | int
) -> Superoperator:
    """Equivalent assembly from the non-Hermitian Hamiltonian plus jump terms.

    Implements rho_dot = -i (H_nh rho - rho H_nh^dag) + sum C rho C^dag; must
    agree elementwise with build_liouvillian.
    """
    cut = FockCutoff.of(cutoff)
    h_nh = md.build_h_nh(params, cut)
    gen = -1j * (left_mult(h_nh) - right_mult(fs.dagger(h_nh)))
    for c in md.build_collapse_ops(params, cut):
        gen += np.kron(c.conj(), c)
    return Superoperator(gen, cut.dim)


def validate_density_matrix(rho: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidDensityMatrixError(f"not square: shape {rho.shape}")
    if abs(np.trace(rho) - 1.0) > tol:
        raise InvalidDensityMatrixError(f"trace {np.trace(rho):.6g} != 1")
    if np.linalg.norm(rho - rho.conj().T) > tol * max(1.0, np.linalg.norm(rho)):
        raise InvalidDensityMatrixError("not Hermitian")
    lowest = float(np.linalg.eigvalsh(rho).min())
    if lowest < -tol:
        raise InvalidDensityMatrixError(f"negative eigenvalue {lowest:.3e}")
    return rho


def interior_density_matrix(
    cutoff: FockCutoff | int, rng: np.random.Generator, margin: int = 1
) -> np.ndarray:
    """Random full-rank density matrix supported on the interior levels.

    Interior support keeps first-moment identities free of truncation
    defects, which live at the top Fock level.
    """
    cut = FockCutoff.of(cutoff)
    idx = fs.interior_indices(cut, margin)
    k = len(idx)
    raw = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    block = raw @ raw.conj().T
    block /= np.trace(block).real
    rho = np.zeros((cut.dim, cut.dim), dtype=complex)
    rho[np.ix_(idx, idx)] = block
    return rho


@dataclass
class MomentCheck:
    """First-moment derivatives from the full generator vs the closed form."""

    lhs: np.ndarray  # (d<a>/dt, d<b>/dt) via tr(op L[rho])
    rhs: np.ndarray  # closed-form -i M v - v0
    diff: np.ndarray

    @property
    def max_abs_diff(self) -> float:
        return float(np.max(np.abs(self.diff)))


def moment_rhs_check(
    params: md.SystemParams,
    cutoff: FockCutoff | int,
    rho: np.ndarray,
    liouvillian: Superoperator | None = None,
) -> MomentCheck:
    """Compare tr(a L[rho]) against -ga <a> - i g <b> - eps (and the b analog).

    The closed form holds for every thermal photon number; the n-dependent
    dissipator terms cancel in the first moments.
    """
    cut = FockCutoff.of(cutoff)
    rho = validate_density_matrix(rho)
    gen = liouvillian if liouvillian is not None else build_liouvillian(params, cut)
    a = fs.mode_annihilation(Mode.A, cut)
    b = fs.mode_annihilation(Mode.B, cut)
    rho_dot = gen.apply(rho)
    lhs = np.array([np.trace(a @ rho_dot), np.trace(b @ rho_dot)])
    mean_a = np.trace(a @ rho)
    mean_b = np.trace(b @ rho)
    dyn = dynamical_matrix(params)
    rhs = -1j * dyn.matrix @ np.array([mean_a, mean_b]) - dyn.drive
    return MomentCheck(lhs=lhs, rhs=rhs, diff=lhs - rhs)


@dataclass
class DynamicalMatrix:
    """Generator of the first-moment vector [<a>, <b>]: v_dot = -i M v - drive."""

    matrix: np.ndarray
    drive: np.ndarray


def dynamical_matrix(params: md.SystemParams) -> DynamicalMatrix:
    m = np.array(
        [[-1j * params.gamma_a, params.g], [params.g, -1j * params.gamma_b]],
        dtype=complex,
    )
    return DynamicalMatrix(matrix=m, drive=np.array([params.eps, params.eps]))


def lambda_pm(derived: md.DerivedParams) -> tuple[complex, complex]:
    """Closed-form eigenvalues of the dynamical matrix: +-Omega - i*gamma."""
    return derived.omega - 1j * derived.gamma, -derived.omega - 1j * derived.gamma


def v_pm(
    derived: md.DerivedParams, g: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigenvectors [+-Omega - i*kappa, g], normalized.

    The coupling g is recovered from the derived quantities (g^2 = Omega^2 +
    kappa^2) unless passed explicitly.
    """
    if g is None:
        g = float(np.sqrt(derived.omega**2 + derived.kappa**2).real)
    plus = np.array([derived.omega - 1j * derived.kappa, g], dtype=complex)
    minus = np.array([-derived.omega - 1j * derived.kappa, g], dtype=complex)
    return plus / np.linalg.norm(plus), minus / np.linalg.norm(minus)


@dataclass
class SpectrumWitness:
    """Full-generator spectral check against the first-moment sector.

    targets are -gamma +- i*Omega; nearest/distances report the closest
    generator eigenvalues. The cluster fields describe the eigenvalue group
    nearest to -gamma (degenerate with coalescing eigenvectors at g = kappa).
    """

    targets: np.ndarray
    nearest: np.ndarray
    distances: np.ndarray
    zero_mode_distance: float
    cluster_size: int
    cluster_min_angle: float | None
    degenerate_pair_flagged: bool


def liouvillian_spectrum_check(
    params: md.SystemParams,
    cutoff: FockCutoff | int,
    tol: float = 1e-6,
    angle_eps: float = sp.DEFAULT_ANGLE_EPS,
) -> SpectrumWitness:
    """Check the generator spectrum contains the first-moment eigenvalues.

    Runs with the drive removed: the drive enters the moment dynamics only
    as the affine term, so the generator spectrum is drive-independent (the
    test suite verifies this numerically at small drive).

    At n_th = 0 the first-moment sector is exactly closed in the truncated
    space, so the containment holds to rounding at any cutoff. For n_th > 0
    the gain channels couple the sector to the truncation boundary and the
    containment is only truncation-limited (converging with the cutoff);
    the n-independence of the full-dynamics coalescence is carried by the
    dynamical matrix, for which this check is a consistency witness only.
    """
    cut = FockCutoff.of(cutoff)
    if cut.d > 8:
        raise ValueError(f"spectrum check limited to d <= 8, got d={cut.d}")
    der = md.derive(params)
    gen = build_liouvillian(params.with_(eps=0.0), cut)
    spectrum = sp.eig(gen.matrix, want_vectors=True)
    targets = np.array(
        [-der.gamma + 1j * der.omega, -der.gamma - 1j * der.omega], dtype=complex
    )
    dists = np.abs(spectrum.eigenvalues[None, :] - targets[:, None])
    nearest_idx = np.argmin(dists, axis=1)
    nearest = spectrum.eigenvalues[nearest_idx]
    distances = dists[np.arange(2), nearest_idx]
    zero_dist = float(np.min(np.abs(spectrum.eigenvalues)))

    eps_cluster = sp.CLUSTER_EPS_SCALE * spectrum.norm
    clusters = sp.cluster_eigenvalues(spectrum.eigenvalues, eps_cluster)
    anchor = -der.gamma + 0j
    near_gamma = min(
        clusters, key=lambda grp: min(abs(spectrum.eigenvalues[i] - anchor) for i in grp)
    )
    min_angle = None
    if len(near_gamma) >= 2:
        min_angle = min(
            sp.principal_angle(spectrum.eigenvectors[:, i], spectrum.eigenvectors[:, j])
            for pos, i in enumerate(near_gamma)
            for j in near_gamma[pos + 1 :]
        )
    flagged = min_angle is not None and min_angle < angle_eps
    if distances.max() > tol:
        raise SpectrumWitnessError(
            f"generator spectrum misses first-moment eigenvalues: "
            f"distances {distances} exceed tol {tol}"
        )
    return SpectrumWitness(
        targets=targets,
        nearest=nearest,
        distances=distances,
        zero_mode_distance=zero_dist,
        cluster_size=len(near_gamma),
        cluster_min_angle=min_angle,
        degenerate_pair_flagged=flagged,
    )
