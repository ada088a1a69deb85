"""Radial grid, discrete operators, norms, and the ball-integral evaluator.

Scalar fields are radially symmetric and live on the uniform grid
r_i = i*h, i = 0..M.  The even extension across r = 0 fixes the origin
closure of every operator; the closure at r = R is selected by the solver's
boundary mode ("dirichlet-zero" or "neumann-zero").
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .params import ModelParams

BOUNDARY_DIRICHLET = "dirichlet-zero"
BOUNDARY_NEUMANN = "neumann-zero"
BOUNDARIES = (BOUNDARY_DIRICHLET, BOUNDARY_NEUMANN)


class NonFiniteFieldError(FloatingPointError):
    """A field picked up NaN/Inf values (blow-up overflow, never silent)."""


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid on [0, R] with M intervals in `dim` dimensions."""

    R: float
    M: int
    dim: int = 1

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.M < 8:
            raise ValueError(f"M must be >= 8, got {self.M}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")

    @property
    def h(self) -> float:
        return self.R / self.M

    @property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, self.R, self.M + 1)

    def to_dict(self) -> dict:
        return {"R": self.R, "M": self.M, "dim": self.dim}

    @classmethod
    def from_dict(cls, data: dict) -> "RadialGrid":
        return cls(R=float(data["R"]), M=int(data["M"]), dim=int(data["dim"]))


@dataclass
class RadialField:
    """Values of an even radial scalar at the grid nodes at one time."""

    grid: RadialGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.M + 1,):
            raise ValueError(
                f"values shape {self.values.shape} != (M+1,) = ({self.grid.M + 1},)"
            )
        ensure_finite(self.values)

    def copy(self) -> "RadialField":
        return RadialField(self.grid, self.values.copy(), self.time)


@dataclass(frozen=True)
class NonlocalPrefix:
    """Running integral J(r_i) of |u|^(q-1) over the ball of radius r_i."""

    grid: RadialGrid
    J: np.ndarray = dc_field(repr=False)


def ensure_finite(values: np.ndarray, what: str = "field") -> None:
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NonFiniteFieldError(f"non-finite {what} value at node {bad}")


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere: 2 pi^(N/2) / Gamma(N/2); 2 for N=1."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def _laplacian_values(u: np.ndarray, h: float, dim: int, boundary: str) -> np.ndarray:
    """Radial Laplacian u'' + (dim-1)/r u' on the node values.

    Origin: the removable singularity gives dim * u''(0), discretized with
    the even-symmetry ghost node.  r = R: per the boundary closure.
    """
    out = np.empty_like(u)
    inv_h2 = 1.0 / (h * h)
    # interior second derivative + first-derivative term
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) * inv_h2
    if dim > 1:
        r = np.arange(1, len(u) - 1, dtype=float) * h
        out[1:-1] += (dim - 1.0) / r * (u[2:] - u[:-2]) / (2.0 * h)
    # origin: ghost u(-h) = u(h)
    out[0] = 2.0 * dim * (u[1] - u[0]) * inv_h2
    if boundary == BOUNDARY_DIRICHLET:
        # boundary node is pinned; its time derivative is forced to zero
        out[-1] = 0.0
    elif boundary == BOUNDARY_NEUMANN:
        # ghost u(R+h) = u(R-h); the (dim-1)/r u' term vanishes with u'(R)=0
        out[-1] = 2.0 * (u[-2] - u[-1]) * inv_h2
    else:
        raise ValueError(f"unknown boundary {boundary!r}")
    return out


def _gradient_values(u: np.ndarray, h: float, boundary: str) -> np.ndarray:
    """Radial derivative: central interior, 0 at the origin by symmetry,
    second-order one-sided at r = R (0 under the neumann closure)."""
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    out[0] = 0.0
    if boundary == BOUNDARY_NEUMANN:
        out[-1] = 0.0
    else:
        out[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    return out


def laplacian(field: RadialField, boundary: str = BOUNDARY_DIRICHLET) -> RadialField:
    """Discrete radial Laplacian of the field (exact on quadratics inside)."""
    vals = _laplacian_values(field.values, field.grid.h, field.grid.dim, boundary)
    return RadialField(field.grid, vals, field.time)


def gradient(field: RadialField, boundary: str = BOUNDARY_DIRICHLET) -> RadialField:
    """Discrete radial derivative of the field."""
    vals = _gradient_values(field.values, field.grid.h, boundary)
    return RadialField(field.grid, vals, field.time)


def _nonlocal_prefix_values(u: np.ndarray, r: np.ndarray, q: float, dim: int) -> np.ndarray:
    """Trapezoid prefix integral of sigma_{N-1} |u|^(q-1) r^(N-1) dr."""
    integrand = np.abs(u) ** (q - 1.0)
    if dim > 1:
        integrand = integrand * r ** (dim - 1.0)
    return sphere_area(dim) * cumulative_trapezoid(integrand, r, initial=0.0)


def nonlocal_prefix(field: RadialField, params: ModelParams) -> NonlocalPrefix:
    """Single-pass J_i = integral of |u|^(q-1) over the ball of radius r_i.

    Nondecreasing in i, J_0 = 0, homogeneous of degree q-1 in the field.
    """
    J = _nonlocal_prefix_values(field.values, field.grid.r, params.q, field.grid.dim)
    return NonlocalPrefix(field.grid, J)


def sup_norm(field: RadialField, radius: float | None = None) -> tuple[float, float]:
    """Max of |u| over nodes with r_i <= radius (whole grid when absent).

    Returns (value, attaining radius); ties break to the smallest radius.
    """
    a = np.abs(field.values)
    if radius is not None:
        if radius > field.grid.R:
            raise ValueError(f"radius {radius} exceeds grid radius {field.grid.R}")
        n = int(np.floor(radius / field.grid.h + 1e-12)) + 1
        a = a[:n]
    i = int(np.argmax(a))
    return float(a[i]), i * field.grid.h


def field_to_csv(field: RadialField, params: ModelParams,
                 boundary: str = BOUNDARY_DIRICHLET) -> str:
    """Snapshot CSV body: r,u,du_dr,J with a comment header carrying time
    and the full parameter set."""
    du = _gradient_values(field.values, field.grid.h, boundary)
    J = _nonlocal_prefix_values(field.values, field.grid.r, params.q, field.grid.dim)
    lines = [f"# time: {field.time!r}"]
    for key, val in params.to_dict().items():
        lines.append(f"# {key}: {val!r}")
    lines.append("r,u,du_dr,J")
    for r, u, g, j in zip(field.grid.r, field.values, du, J):
        lines.append(f"{r!r},{u!r},{g!r},{j!r}")
    return "\n".join(lines) + "\n"
