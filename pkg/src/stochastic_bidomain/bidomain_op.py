# src/stochastic_bidomain/bidomain_op.py - Conductivity operators and the bidomain operator.
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .mesh import Field, Grid, gradient_operator, gradient_sq, make_grid

Conductivity = float | np.ndarray

DEFAULT_BOUNDS: tuple[float, float] = (1e-2, 1e2)

# ---------------------------------------------------------------------
# Conductivities
# ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConductivitySpec:
    sigma_i: Conductivity
    sigma_e: Conductivity
    ellipticity_bounds: tuple[float, float] = DEFAULT_BOUNDS

    def __post_init__(self) -> None:
        lo, hi = self.ellipticity_bounds
        if not (0 < lo <= hi):
            raise ValueError(f"ellipticity bounds need 0 < s1 <= s2, got {self.ellipticity_bounds}")


def _nodal_tensors(sigma: Conductivity, grid: Grid) -> np.ndarray:
    """Return per-node conductivities: shape (N,) for scalars, (N, 2, 2) for 2-D tensors."""
    s = np.asarray(sigma, dtype=float)
    n = grid.n_nodes

    if s.ndim == 0:
        return np.full(n, float(s))
    if s.shape == (n,):
        return s.copy()
    if grid.dimension == 2 and s.shape == (2, 2):
        return np.broadcast_to(s, (n, 2, 2)).copy()
    if grid.dimension == 2 and s.shape == (n, 2, 2):
        return s.copy()
    raise ValueError(
        f"grid mismatch: conductivity shape {s.shape} does not fit a "
        f"{grid.dimension}-D grid with {n} nodes"
    )


def _check_ellipticity(s: np.ndarray, bounds: tuple[float, float]) -> None:
    lo, hi = bounds
    tol = 1e-12 * max(1.0, hi)
    if s.ndim == 1:
        eig = s
    else:
        if np.max(np.abs(s[:, 0, 1] - s[:, 1, 0])) > tol:
            raise ValueError("ellipticity violation: conductivity tensors must be symmetric")
        eig = np.linalg.eigvalsh(s).ravel()
    if not np.all(np.isfinite(eig)) or eig.min() < lo - tol or eig.max() > hi + tol:
        raise ValueError(
            f"ellipticity violation: conductivity eigenvalues span "
            f"[{eig.min():.6g}, {eig.max():.6g}], outside [{lo:.6g}, {hi:.6g}]"
        )


def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 2.0 * a * b / (a + b)


# ---------------------------------------------------------------------
# Elliptic operators
# ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EllipticOperator:
    """u -> -div(sigma grad u) with zero Neumann flux, stored as stiffness K and nodal weights.

    The action is K u / w; ``matrix`` is the symmetric form W^-1/2 K W^-1/2.
    """

    grid: Grid
    stiffness: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return self.grid.quadrature_weight

    @cached_property
    def matrix(self) -> np.ndarray:
        r = 1.0 / np.sqrt(self.weights)
        return self.stiffness * r[:, None] * r[None, :]

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.stiffness @ np.asarray(values, dtype=float) / self.weights


def _difference(n: int, h: float) -> sparse.csr_matrix:
    ones = np.ones(n - 1)
    return sparse.diags([-ones, ones], [0, 1], shape=(n - 1, n), format="csr") / h


def _average(n: int) -> sparse.csr_matrix:
    half = np.full(n - 1, 0.5)
    return sparse.diags([half, half], [0, 1], shape=(n - 1, n), format="csr")


def _stiffness_1d(s: np.ndarray, grid: Grid) -> sparse.spmatrix:
    (n,) = grid.shape
    (h,) = grid.spacing
    face = _harmonic(s[:-1], s[1:])
    D = _difference(n, h)
    return D.T @ sparse.diags(h * face) @ D


def _stiffness_2d(s: np.ndarray, grid: Grid) -> sparse.spmatrix:
    nx, ny = grid.shape
    hx, hy = grid.spacing
    area = hx * hy

    if s.ndim == 1:
        sxx = syy = s.reshape(nx, ny)
        sxy = np.zeros((nx, ny))
    else:
        sxx = s[:, 0, 0].reshape(nx, ny)
        syy = s[:, 1, 1].reshape(nx, ny)
        sxy = s[:, 0, 1].reshape(nx, ny)

    # x-edges (i, j) -> (i+1, j); boundary rows j = 0, ny-1 touch one cell
    cx = _harmonic(sxx[:-1, :], sxx[1:, :])
    mult_x = np.full((nx - 1, ny), 1.0)
    mult_x[:, [0, -1]] = 0.5
    # y-edges (i, j) -> (i, j+1)
    cy = _harmonic(syy[:, :-1], syy[:, 1:])
    mult_y = np.full((nx, ny - 1), 1.0)
    mult_y[[0, -1], :] = 0.5

    Ix, Iy = sparse.identity(nx, format="csr"), sparse.identity(ny, format="csr")
    Dx = sparse.kron(_difference(nx, hx), Iy, format="csr")
    Dy = sparse.kron(Ix, _difference(ny, hy), format="csr")
    K = Dx.T @ sparse.diags((area * cx * mult_x).ravel()) @ Dx
    K = K + Dy.T @ sparse.diags((area * cy * mult_y).ravel()) @ Dy

    if np.any(sxy != 0.0):
        s_cell = 0.25 * (sxy[:-1, :-1] + sxy[1:, :-1] + sxy[:-1, 1:] + sxy[1:, 1:])
        # each cell couples its two x-edges with its two y-edges; every 2x2 block must be PSD
        cx_lo, cx_hi = cx[:, :-1], cx[:, 1:]
        cy_lo, cy_hi = cy[:-1, :], cy[1:, :]
        worst = np.minimum.reduce(
            [cx_lo * cy_lo, cx_lo * cy_hi, cx_hi * cy_lo, cx_hi * cy_hi]
        ) - s_cell**2
        if np.any(worst < 0):
            raise ValueError(
                "ellipticity violation: off-diagonal conductivity too large for the "
                f"face-harmonic stencil (min block determinant {worst.min():.3e})"
            )
        Cx = sparse.kron(_difference(nx, hx), _average(ny), format="csr")
        Cy = sparse.kron(_average(nx), _difference(ny, hy), format="csr")
        S = sparse.diags(s_cell.ravel())
        K = K + area * (Cx.T @ S @ Cy + Cy.T @ S @ Cx)

    return K


def assemble_elliptic(
    sigma: Conductivity,
    grid: Grid,
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
) -> EllipticOperator:
    s = _nodal_tensors(sigma, grid)
    if grid.dimension == 1 and s.ndim != 1:
        raise ValueError("1-D grids take scalar conductivities only")
    _check_ellipticity(s, bounds)

    K = _stiffness_1d(s, grid) if grid.dimension == 1 else _stiffness_2d(s, grid)
    K = K.toarray()
    K = 0.5 * (K + K.T)
    return EllipticOperator(grid=grid, stiffness=K)


# ---------------------------------------------------------------------
# Bidomain operator
# ---------------------------------------------------------------------


class OperatorConstants(NamedTuple):
    alpha: float
    continuity_m: float
    poincare_cp: float


@dataclass(frozen=True, eq=False)
class BidomainOperator:
    """Eigendecomposition of A_i (A_i + A_e)^+ A_e; mode 0 is the constant with eigenvalue 0."""

    grid: Grid
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    alpha: float = float("nan")
    continuity_m: float = float("nan")
    poincare_cp: float = float("nan")

    @property
    def n_modes(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def weights(self) -> np.ndarray:
        return self.grid.quadrature_weight

    @cached_property
    def analysis(self) -> np.ndarray:
        # rows psi_k^T W, so analysis @ u gives (u, psi_k)_H
        return (self.eigenvectors * self.weights[:, None]).T

    def to_modes(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) @ self.analysis.T

    def from_modes(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs, dtype=float) @ self.eigenvectors.T

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.from_modes(self.eigenvalues * self.to_modes(values))

    @property
    def constants(self) -> OperatorConstants:
        return OperatorConstants(self.alpha, self.continuity_m, self.poincare_cp)

    def to_dict(self, n_eigenvalues: int | None = None) -> dict[str, object]:
        lam = self.eigenvalues if n_eigenvalues is None else self.eigenvalues[:n_eigenvalues]
        return {
            "grid": self.grid.to_dict(),
            "n_modes": self.n_modes,
            "eigenvalues": [float(x) for x in lam],
            "alpha": self.alpha,
            "continuity_m": self.continuity_m,
            "poincare_cp": self.poincare_cp,
        }


def compose_bidomain(A_i: EllipticOperator, A_e: EllipticOperator) -> BidomainOperator:
    if A_i.grid != A_e.grid:
        raise ValueError(f"grid mismatch: {A_i.grid} vs {A_e.grid}")
    grid = A_i.grid
    sqrt_w = np.sqrt(grid.quadrature_weight)

    Ai, Ae = A_i.matrix, A_e.matrix
    s_eval, s_evec = np.linalg.eigh(Ai + Ae)
    tol = 1e-10 * max(float(np.max(np.abs(s_eval))), 1.0)
    kernel = s_eval <= tol
    if int(kernel.sum()) != 1:
        raise ValueError(
            f"singular composition beyond the constant kernel: {int(kernel.sum())} "
            "near-zero eigenvalues in A_i + A_e (non-elliptic input?)"
        )
    inv = np.where(kernel, 0.0, 1.0 / np.where(kernel, 1.0, s_eval))
    pinv = (s_evec * inv) @ s_evec.T

    B = Ai @ pinv @ Ae
    B = 0.5 * (B + B.T)
    lam, Q = np.linalg.eigh(B)

    scale = max(float(np.max(np.abs(lam))), 1.0)
    if abs(lam[0]) > 1e-8 * scale or lam[1] <= 1e-10 * scale:
        raise ValueError(
            f"singular composition beyond the constant kernel: leading eigenvalues {lam[:3]}"
        )
    lam[0] = 0.0
    Q[:, 0] = sqrt_w / np.sqrt(grid.measure)

    op = BidomainOperator(grid=grid, eigenvalues=lam, eigenvectors=Q / sqrt_w[:, None])
    return replace(op, **estimate_constants(op)._asdict())


def build_operator(spec: ConductivitySpec, grid: Grid) -> BidomainOperator:
    A_i = assemble_elliptic(spec.sigma_i, grid, spec.ellipticity_bounds)
    A_e = assemble_elliptic(spec.sigma_e, grid, spec.ellipticity_bounds)
    return compose_bidomain(A_i, A_e)


# ---------------------------------------------------------------------
# Forms, semigroup, constants
# ---------------------------------------------------------------------


def _check_field(op: BidomainOperator, *fields: Field) -> None:
    for f in fields:
        if f.grid != op.grid:
            raise ValueError(f"grid mismatch: field on {f.grid}, operator on {op.grid}")


def bilinear_form(op: BidomainOperator, u: Field, v: Field) -> float:
    _check_field(op, u, v)
    return float(np.sum(op.eigenvalues * op.to_modes(u.values) * op.to_modes(v.values)))


def semigroup_apply(op: BidomainOperator, t: float, u: Field) -> Field:
    if t < 0:
        raise ValueError(f"semigroup time must be >= 0, got {t}")
    _check_field(op, u)
    if t == 0:
        return u
    coeffs = op.to_modes(u.values) * np.exp(-op.eigenvalues * t)
    return Field(op.grid, op.from_modes(coeffs))


def _unit_laplacian_gap(grid: Grid) -> float:
    # the unit-conductivity stencil is a Kronecker sum, so the gap is the smallest 1-D gap
    gaps = []
    for L, n in zip(grid.extent, grid.nodes_per_axis):
        axis = make_grid(1, L, n)
        evals = np.linalg.eigvalsh(assemble_elliptic(1.0, axis, (1.0, 1.0)).matrix)
        gaps.append(float(evals[1]))
    return min(gaps)


def estimate_constants(
    op: BidomainOperator, n_random: int = 100, seed: int = 0
) -> OperatorConstants:
    lam = op.eigenvalues[1:]
    if lam.size == 0 or np.all(lam <= 0):
        raise ValueError("degenerate spectrum: all eigenvalues are zero")

    grid = op.grid
    w = grid.quadrature_weight
    psi = op.eigenvectors[:, 1:]

    # gradient Gram matrix of the positive modes, on the stiffness face stencil
    G = np.zeros((lam.size, lam.size))
    for D, fw in zip(gradient_operator(grid), grid.face_weights):
        Dpsi = D @ psi
        G += Dpsi.T @ (fw[:, None] * Dpsi)
    G = 0.5 * (G + G.T)

    alpha_ratio = float(np.min(lam / (1.0 + np.diag(G))))
    r = 1.0 / np.sqrt(lam)
    alpha_exact = 1.0 / float(np.linalg.eigvalsh(r[:, None] * G * r[None, :])[-1])

    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((n_random, lam.size))
    u = op.from_modes(np.hstack([np.zeros((n_random, 1)), coeffs]))
    v = rng.standard_normal((n_random, grid.n_nodes))
    u_hat, v_hat = op.to_modes(u), op.to_modes(v)
    a_uu = np.sum(op.eigenvalues * u_hat * u_hat, axis=1)
    a_uv = np.sum(op.eigenvalues * u_hat * v_hat, axis=1)
    h_u = u**2 @ w
    h_v = v**2 @ w
    g_u = gradient_sq(grid, u)
    g_v = gradient_sq(grid, v)
    alpha_random = float(np.min(a_uu / g_u))

    alpha = min(alpha_ratio, alpha_exact, alpha_random)
    continuity_m = float(
        max(
            np.max(np.abs(a_uv) / np.sqrt((h_u + g_u) * (h_v + g_v))),
            np.max(lam / (1.0 + np.diag(G))),
        )
    )
    poincare_cp = 1.0 / _unit_laplacian_gap(grid)
    return OperatorConstants(alpha=alpha, continuity_m=continuity_m, poincare_cp=poincare_cp)


__all__ = [
    "ConductivitySpec",
    "EllipticOperator",
    "BidomainOperator",
    "OperatorConstants",
    "assemble_elliptic",
    "compose_bidomain",
    "build_operator",
    "bilinear_form",
    "semigroup_apply",
    "estimate_constants",
]
