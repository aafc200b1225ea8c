# src/stochastic_bidomain/mesh.py - Uniform Neumann grids, nodal fields and discrete norms.
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# ---------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _tensor_weights(per_axis: Sequence[np.ndarray]) -> np.ndarray:
    w = per_axis[0]
    for extra in per_axis[1:]:
        w = np.multiply.outer(w, extra)
    out = np.asarray(w, dtype=float).ravel()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Grid:
    dimension: int
    extent: tuple[float, ...]
    nodes_per_axis: tuple[int, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nodes_per_axis

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.nodes_per_axis))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / (n - 1) for L, n in zip(self.extent, self.nodes_per_axis))

    @property
    def measure(self) -> float:
        return float(np.prod(self.extent))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(0.0, L, n) for L, n in zip(self.extent, self.nodes_per_axis))

    @cached_property
    def quadrature_weight(self) -> np.ndarray:
        return _tensor_weights(
            [_trapezoid_weights(n, h) for n, h in zip(self.nodes_per_axis, self.spacing)]
        )

    @cached_property
    def face_weights(self) -> tuple[np.ndarray, ...]:
        """Per axis, the weight of each face: h along the axis, trapezoid weights across it."""
        out = []
        for axis, (n, h) in enumerate(zip(self.nodes_per_axis, self.spacing)):
            per_axis = [_trapezoid_weights(m, s) for m, s in zip(self.nodes_per_axis, self.spacing)]
            per_axis[axis] = np.full(n - 1, h)
            out.append(_tensor_weights(per_axis))
        return tuple(out)

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Flattened nodal coordinates per axis (ij ordering, x slowest)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return tuple(m.ravel() for m in mesh)

    def to_dict(self) -> dict[str, object]:
        return {
            "dimension": self.dimension,
            "extent": list(self.extent),
            "nodes_per_axis": list(self.nodes_per_axis),
        }


def make_grid(
    dimension: int,
    extent: float | Sequence[float],
    nodes_per_axis: int | Sequence[int],
) -> Grid:
    if dimension not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dimension}")

    ext = (float(extent),) * dimension if np.isscalar(extent) else tuple(map(float, extent))
    nodes = (
        (int(nodes_per_axis),) * dimension
        if np.isscalar(nodes_per_axis)
        else tuple(int(n) for n in nodes_per_axis)
    )

    if len(ext) != dimension or len(nodes) != dimension:
        raise ValueError(
            f"extent/nodes_per_axis must have {dimension} entries: extent={ext}, nodes={nodes}"
        )
    if any(not np.isfinite(L) or L <= 0 for L in ext):
        raise ValueError(f"extent must be positive, got {ext}")
    if any(n < 3 for n in nodes):
        raise ValueError(f"nodes_per_axis must be >= 3, got {nodes}")

    return Grid(dimension=dimension, extent=ext, nodes_per_axis=nodes)


# ---------------------------------------------------------------------
# Field
# ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size != self.grid.n_nodes:
            raise ValueError(
                f"Field has {vals.size} values but grid has {self.grid.n_nodes} nodes"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> Field:
        return cls(grid, np.full(grid.n_nodes, float(value)))

    @classmethod
    def zeros(cls, grid: Grid) -> Field:
        return cls.constant(grid, 0.0)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> Field:
        return cls(grid, np.broadcast_to(fn(*grid.coordinates), (grid.n_nodes,)))


def _same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


# ---------------------------------------------------------------------
# Discrete norms
# ---------------------------------------------------------------------


def inner_product_h(a: Field, b: Field) -> float:
    _same_grid(a, b)
    return float(np.sum(a.grid.quadrature_weight * a.values * b.values))


def norm_h_sq(a: Field) -> float:
    return inner_product_h(a, a)


def gradient_components(grid: Grid, values: np.ndarray) -> list[np.ndarray]:
    """Face differences (u[i+1] - u[i]) / h per axis; works on (..., n_nodes) stacks.

    Component ``axis`` lives on the faces of that axis, flattened like ``grid.face_weights``.
    """
    arr = np.asarray(values, dtype=float)
    lead = arr.shape[:-1]
    arr = arr.reshape(lead + grid.shape)
    offset = len(lead)
    comps = []
    for axis, h in enumerate(grid.spacing):
        d = np.diff(arr, axis=offset + axis) / h
        comps.append(d.reshape(lead + (-1,)))
    return comps


def gradient_sq(grid: Grid, values: np.ndarray) -> np.ndarray:
    comps = gradient_components(grid, values)
    return sum(np.sum(w * d * d, axis=-1) for w, d in zip(grid.face_weights, comps))


def norm_v_sq(a: Field) -> float:
    return norm_h_sq(a) + float(gradient_sq(a.grid, a.values))


def norm_l4(a: Field) -> float:
    return float(np.sum(a.grid.quadrature_weight * a.values**4)) ** 0.25


def weighted_mean(a: Field) -> float:
    return float(np.sum(a.grid.quadrature_weight * a.values)) / a.grid.measure


def mean_zero_project(a: Field) -> Field:
    return Field(a.grid, a.values - weighted_mean(a))


def gradient_operator(grid: Grid) -> list[np.ndarray]:
    """Dense matrices D_axis with D_axis @ u == gradient_components(grid, u)[axis]."""
    eye = np.eye(grid.n_nodes)
    return [d.T for d in gradient_components(grid, eye)]


__all__ = [
    "Grid",
    "Field",
    "make_grid",
    "inner_product_h",
    "norm_h_sq",
    "norm_v_sq",
    "norm_l4",
    "weighted_mean",
    "mean_zero_project",
    "gradient_components",
    "gradient_sq",
    "gradient_operator",
]
