"""One-dimensional periodic layered cells and their piecewise-constant subdivision.

The cell occupies ``[-a/2, a/2)`` with layers laid out left to right.  A
:class:`DiscretizedCell` splits every layer into equal-width subregions; the
eigenstress/eigenvelocity unknowns live on those subregions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CountMismatch, EmptyCell, InvalidTolerance, NonPositiveInput

DEFAULT_EPS_MAT = 1e-9


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise NonPositiveInput(f"{name} must be finite and > 0, got {value!r}")
    return value


@dataclass(frozen=True)
class Material:
    density: float
    compliance: float

    def __post_init__(self):
        object.__setattr__(self, "density", _check_positive("density", self.density))
        object.__setattr__(self, "compliance", _check_positive("compliance", self.compliance))

    @classmethod
    def from_modulus(cls, density: float, modulus: float) -> "Material":
        return cls(density, 1.0 / _check_positive("modulus", modulus))

    @property
    def modulus(self) -> float:
        return 1.0 / self.compliance

    @property
    def wave_speed(self) -> float:
        return 1.0 / math.sqrt(self.density * self.compliance)

    @property
    def impedance(self) -> float:
        return self.density * self.wave_speed


@dataclass(frozen=True)
class Layer:
    material: Material
    thickness: float

    def __post_init__(self):
        object.__setattr__(self, "thickness", _check_positive("thickness", self.thickness))


@dataclass(frozen=True)
class UnitCell:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        if len(self.layers) == 0:
            raise EmptyCell("a unit cell needs at least one layer")
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def period(self) -> float:
        return math.fsum(layer.thickness for layer in self.layers)

    @property
    def interfaces(self) -> np.ndarray:
        """Layer boundaries, ``len(layers) + 1`` values from -a/2 to a/2."""
        a = self.period
        edges = np.empty(len(self.layers) + 1)
        edges[0] = -0.5 * a
        acc = 0.0
        for j, layer in enumerate(self.layers):
            acc += layer.thickness
            edges[j + 1] = -0.5 * a + acc
        edges[-1] = 0.5 * a
        return edges

    @property
    def densities(self) -> np.ndarray:
        return np.array([layer.material.density for layer in self.layers])

    @property
    def compliances(self) -> np.ndarray:
        return np.array([layer.material.compliance for layer in self.layers])

    @property
    def thicknesses(self) -> np.ndarray:
        return np.array([layer.thickness for layer in self.layers])

    def layer_index(self, x) -> np.ndarray:
        """Index of the layer containing each position (positions folded into the cell)."""
        a = self.period
        xf = np.mod(np.asarray(x, dtype=float) + 0.5 * a, a) - 0.5 * a
        idx = np.searchsorted(self.interfaces[1:-1], xf, side="right")
        return idx

    def density_at(self, x) -> np.ndarray:
        return self.densities[self.layer_index(x)]

    def compliance_at(self, x) -> np.ndarray:
        return self.compliances[self.layer_index(x)]


@dataclass(frozen=True)
class ReferenceMedium:
    density: float
    compliance: float

    def __post_init__(self):
        object.__setattr__(self, "density", _check_positive("rho0", self.density))
        object.__setattr__(self, "compliance", _check_positive("D0", self.compliance))

    @property
    def wave_speed(self) -> float:
        return 1.0 / math.sqrt(self.density * self.compliance)

    def nu(self, omega):
        """Reference wavenumber ``omega * sqrt(rho0 D0)``."""
        return np.asarray(omega) * math.sqrt(self.density * self.compliance)


@dataclass(frozen=True)
class Subregion:
    center: float
    length: float
    fraction: float
    compliance: float
    density: float
    layer: int


@dataclass(frozen=True)
class DiscretizedCell:
    cell: UnitCell
    ref: ReferenceMedium
    subregions: tuple[Subregion, ...]
    counts: tuple[int, ...]
    eps_mat: float = DEFAULT_EPS_MAT
    centers: np.ndarray = field(init=False, repr=False, compare=False)
    lengths: np.ndarray = field(init=False, repr=False, compare=False)
    fractions: np.ndarray = field(init=False, repr=False, compare=False)
    compliances: np.ndarray = field(init=False, repr=False, compare=False)
    densities: np.ndarray = field(init=False, repr=False, compare=False)
    active_sigma: np.ndarray = field(init=False, repr=False, compare=False)
    active_velocity: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        subs = self.subregions
        arrays = {
            "centers": np.array([s.center for s in subs]),
            "lengths": np.array([s.length for s in subs]),
            "fractions": np.array([s.fraction for s in subs]),
            "compliances": np.array([s.compliance for s in subs]),
            "densities": np.array([s.density for s in subs]),
        }
        D0, rho0 = self.ref.compliance, self.ref.density
        arrays["active_sigma"] = np.abs(arrays["compliances"] - D0) > self.eps_mat * D0
        arrays["active_velocity"] = np.abs(arrays["densities"] - rho0) > self.eps_mat * rho0
        for name, arr in arrays.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_subregions(self) -> int:
        return len(self.subregions)

    @property
    def is_trivial(self) -> bool:
        """True when the cell is materially identical to the reference medium."""
        return not (self.active_sigma.any() or self.active_velocity.any())

    @property
    def edges(self) -> np.ndarray:
        left = self.centers - 0.5 * self.lengths
        return np.append(left, self.cell.period * 0.5)


def build_cell(layers: Iterable[Sequence[float]]) -> UnitCell:
    """Build a cell from ``(density, compliance, thickness)`` triples."""
    layers = list(layers)
    if not layers:
        raise EmptyCell("layer list is empty")
    built = []
    for j, entry in enumerate(layers):
        if len(entry) != 3:
            raise ValueError(f"layer {j}: expected (density, compliance, thickness), got {entry!r}")
        rho, D, h = entry
        built.append(Layer(Material(rho, D), h))
    return UnitCell(tuple(built))


def reference_from_average(cell: UnitCell) -> ReferenceMedium:
    """Volume-averaged density and compliance of the cell."""
    a = cell.period
    h = cell.thicknesses
    return ReferenceMedium(
        math.fsum(h * cell.densities) / a,
        math.fsum(h * cell.compliances) / a,
    )


def reference_from_layer(cell: UnitCell, index: int) -> ReferenceMedium:
    """Reference medium equal to the material of layer ``index`` (0-based)."""
    mat = cell.layers[index].material
    return ReferenceMedium(mat.density, mat.compliance)


def discretize(
    cell: UnitCell,
    per_layer_counts: Sequence[int],
    ref: ReferenceMedium | None = None,
    eps_mat: float = DEFAULT_EPS_MAT,
) -> DiscretizedCell:
    """Split every layer into equal subregions and flag those differing from ``ref``.

    ``ref`` defaults to the volume-averaged medium.  Subregion boundaries never
    straddle a material interface.
    """
    counts = [int(c) for c in per_layer_counts]
    if len(counts) != len(cell.layers):
        raise CountMismatch(
            f"discretization has {len(counts)} entries but the cell has {len(cell.layers)} layers"
        )
    if any(c <= 0 for c in counts):
        raise NonPositiveInput(f"subregion counts must be positive, got {counts}")
    if not (0.0 < eps_mat < 1.0):
        raise InvalidTolerance(f"eps_mat must lie in (0, 1), got {eps_mat!r}")
    if ref is None:
        ref = reference_from_average(cell)

    a = cell.period
    edges = cell.interfaces
    subs = []
    for j, (layer, n) in enumerate(zip(cell.layers, counts)):
        bounds = np.linspace(edges[j], edges[j + 1], n + 1)
        for k in range(n):
            lo, hi = bounds[k], bounds[k + 1]
            subs.append(
                Subregion(
                    center=0.5 * (lo + hi),
                    length=hi - lo,
                    fraction=(hi - lo) / a,
                    compliance=layer.material.compliance,
                    density=layer.material.density,
                    layer=j,
                )
            )
    return DiscretizedCell(cell, ref, tuple(subs), tuple(counts), float(eps_mat))
