"""Reference cells used by the configs, tests and benchmarks."""
from __future__ import annotations

from dataclasses import dataclass

from .spectral import SpectralBasis
from .unit_cell import (
    DiscretizedCell,
    UnitCell,
    build_cell,
    discretize,
    reference_from_average,
    reference_from_layer,
)

# stiff matrix and a compliant filler
_MATRIX = (8.0, 1.0 / 300.0)
_FILLER = (1.0, 1.0)
_CORE = (6.0, 1.0 / 200.0)
_FILLER_B = (1.5, 0.5)


@dataclass(frozen=True)
class Fixture:
    cell: UnitCell
    counts: tuple[int, ...]
    n_max: int
    reference: str  # "average" or "layer:<0-based index>"

    def discretized(self, counts=None, reference=None) -> DiscretizedCell:
        ref_key = reference or self.reference
        if ref_key == "average":
            ref = reference_from_average(self.cell)
        else:
            ref = reference_from_layer(self.cell, int(ref_key.split(":")[1]))
        return discretize(self.cell, counts or self.counts, ref)

    def basis(self, n_max=None) -> SpectralBasis:
        return SpectralBasis(n_max or self.n_max, self.cell.period)


def test_bilayer(count: int = 15, n_max: int = 15) -> Fixture:
    """Equal halves, density 1 and 4, compliance 1 and 1/16, period 1."""
    cell = build_cell([(1.0, 1.0, 0.5), (4.0, 1.0 / 16.0, 0.5)])
    return Fixture(cell, (count, count), n_max, "average")


def symmetric_four_layer() -> Fixture:
    """Mirror-symmetric cell: matrix | filler | core | filler | matrix."""
    cell = build_cell([
        (*_MATRIX, 0.15),
        (*_FILLER, 0.2),
        (*_CORE, 0.3),
        (*_FILLER, 0.2),
        (*_MATRIX, 0.15),
    ])
    return Fixture(cell, (5, 15, 5, 15, 5), 10, "average")


def asymmetric_four_layer() -> Fixture:
    """Two different fillers around the core; reference is the outer matrix."""
    cell = build_cell([
        (*_MATRIX, 0.15),
        (*_FILLER, 0.2),
        (*_CORE, 0.3),
        (*_FILLER_B, 0.2),
        (*_MATRIX, 0.15),
    ])
    return Fixture(cell, (1, 15, 10, 15, 1), 10, "layer:0")


def homogeneous(density: float = 1.0, compliance: float = 1.0) -> Fixture:
    cell = build_cell([(density, compliance, 1.0)])
    return Fixture(cell, (1,), 10, "average")
