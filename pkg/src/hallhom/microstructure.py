"""Rasterized period cells and piecewise-constant conductivity fields.

Cells are centered at the origin: the cross cell is ``(-l/2, l/2) x (-1/2, 1/2)``,
every other cell is the unit square/cube ``(-1/2, 1/2)^d``. Element membership
is decided by the element center; points on a phase boundary belong to phase 2.

Element arrays are indexed ``[ix, iy(, iz)]`` and flattened x-fastest
(``order="F"``), which is also the order of the HHOM-MASK text format.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor_core import PerturbedPhase, perturbed_tensor

MIN_RESOLUTION = 4
MASK_MAGIC = "HHOM-MASK v1"
TIE_RTOL = 1e-12  # centers this close to an interface count as phase 2


class MaskFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class CellGeometry:
    dim: int
    extents: tuple[float, ...]
    resolution: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"unsupported dimension {self.dim}")
        if len(self.extents) != self.dim or min(self.extents) <= 0:
            raise ValueError(f"extents {self.extents} must be {self.dim} positive lengths")
        if self.resolution < MIN_RESOLUTION:
            raise ValueError(f"resolution must be >= {MIN_RESOLUTION}, got {self.resolution}")

    @classmethod
    def unit(cls, dim: int, resolution: int) -> "CellGeometry":
        return cls(dim, (1.0,) * dim, resolution)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(max(1, int(round(e * self.resolution))) for e in self.extents)

    @property
    def spacing(self) -> np.ndarray:
        return np.array(self.extents) / np.array(self.shape)

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def ell(self) -> float:
        return float(self.extents[0])

    def centers(self) -> list[np.ndarray]:
        """Element-center coordinates, one broadcastable array per axis."""
        out = []
        for axis, (n, ext) in enumerate(zip(self.shape, self.extents)):
            # integer numerators keep the coordinates exactly antisymmetric about 0
            c = (2 * np.arange(n) + 1 - n) * ext / (2 * n)
            sh = [1] * self.dim
            sh[axis] = n
            out.append(c.reshape(sh))
        return out


@dataclass(frozen=True, eq=False)
class PhaseMask:
    """Characteristic function of phase 2 on the rasterized cell."""

    geometry: CellGeometry
    flags: np.ndarray

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool)
        if flags.shape != self.geometry.shape:
            raise ValueError(f"flags shape {flags.shape} != grid {self.geometry.shape}")
        flags = flags.copy()
        flags.setflags(write=False)
        object.__setattr__(self, "flags", flags)

    @property
    def fraction(self) -> float:
        return float(self.flags.mean())

    @property
    def area(self) -> float:
        """Measure of the phase-2 set (fraction times cell volume)."""
        return self.fraction * self.geometry.volume

    def flat(self) -> np.ndarray:
        return self.flags.ravel(order="F")

    def __eq__(self, other):
        return (
            isinstance(other, PhaseMask)
            and self.geometry == other.geometry
            and np.array_equal(self.flags, other.flags)
        )


@dataclass(frozen=True, eq=False)
class ConductivityField:
    """Per-element conductivity, stored as a tensor table and a per-element index.

    ``tensors[e] == table[index[e]]`` with elements flattened x-fastest.
    """

    geometry: CellGeometry
    table: np.ndarray
    index: np.ndarray
    coercivity: float = field(init=False)

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        d = self.geometry.dim
        if table.ndim != 3 or table.shape[1:] != (d, d):
            raise ValueError(f"table must have shape (m, {d}, {d}), got {table.shape}")
        if not np.all(np.isfinite(table)):
            raise ValueError("conductivity entries must be finite")
        index = np.asarray(self.index, dtype=np.intp).ravel()
        if index.size != self.geometry.n_elements:
            raise ValueError("index size does not match the grid")
        if index.size and (index.min() < 0 or index.max() >= len(table)):
            raise ValueError("index out of range of the tensor table")
        used = np.unique(index)
        sym = 0.5 * (table[used] + np.swapaxes(table[used], 1, 2))
        coercivity = float(np.linalg.eigvalsh(sym).min())
        if coercivity <= 0:
            raise ValueError(f"conductivity field is not coercive (min eig {coercivity:.3e})")
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "coercivity", coercivity)

    @classmethod
    def constant(cls, geometry: CellGeometry, A) -> "ConductivityField":
        A = np.asarray(A, dtype=float)
        return cls(geometry, A[None], np.zeros(geometry.n_elements, dtype=np.intp))

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def tensors(self) -> np.ndarray:
        return self.table[self.index]

    @property
    def contrast(self) -> float:
        used = self.table[np.unique(self.index)]
        return float(np.abs(used).max(axis=(1, 2)).max() / self.coercivity)

    def map(self, fn) -> "ConductivityField":
        """Apply a pointwise tensor map (Keller dual, Dykhne transform, ...)."""
        return ConductivityField(self.geometry, np.array([fn(A) for A in self.table]), self.index)

    def transpose(self) -> "ConductivityField":
        return ConductivityField(self.geometry, np.swapaxes(self.table, 1, 2), self.index)

    def is_symmetric(self, tol: float = 1e-10) -> bool:
        t = self.table
        scale = np.abs(t).max(axis=(1, 2))
        return bool(np.all(np.abs(t - np.swapaxes(t, 1, 2)).max(axis=(1, 2)) <= tol * scale))

    def scalar_values(self) -> np.ndarray:
        """Per-element isotropic value, for fields of the form ``a(x) I``."""
        d = self.dim
        t = self.table
        if np.abs(t - t[:, :1, :1] * np.eye(d)).max() > 1e-12 * np.abs(t).max():
            raise ValueError("field is not isotropic")
        return t[:, 0, 0][self.index].reshape(self.geometry.shape, order="F")


# --- builders ----------------------------------------------------------------


def _require_resolved(feature: float, geometry: CellGeometry, what: str, minimum: int):
    h = float(geometry.spacing.max())
    if feature / h < minimum - 1e-9:
        raise ValueError(
            f"resolution {geometry.resolution} too coarse: {what} {feature:g} spans "
            f"{feature / h:.2f} elements (< {minimum})"
        )


def cross_fraction(t: float, ell: float = 1.0) -> float:
    """Analytic volume fraction ``(2t(l+1) - 4t^2)/l`` of the cross."""
    return (2 * t * (ell + 1) - 4 * t * t) / ell


def build_cross_cell(t: float, ell: float, resolution: int) -> PhaseMask:
    """Two orthogonal bars of width ``2t`` through the center of the ``l x 1`` cell."""
    if not 0 < t <= 0.5:
        raise ValueError(f"bar half-width t must lie in (0, 1/2], got {t}")
    if ell < 1:
        raise ValueError(f"cell aspect ell must be >= 1, got {ell}")
    geom = CellGeometry(2, (float(ell), 1.0), resolution)
    _require_resolved(2 * t, geom, "bar width", 2)
    x, y = geom.centers()
    tt = t * (1 + TIE_RTOL)
    flags = (np.abs(x) <= tt) | (np.abs(y) <= tt)
    return PhaseMask(geom, flags)


def build_fiber_cell_3d(r: float, resolution: int) -> PhaseMask:
    """Closed cylinder of radius ``r`` along ``x3`` through the cube center."""
    if not 0 < r < 0.5:
        raise ValueError(f"fiber radius must lie in (0, 1/2), got {r}")
    geom = CellGeometry.unit(3, resolution)
    _require_resolved(2 * r, geom, "fiber diameter", 3)
    x, y, z = geom.centers()
    flags = np.broadcast_to(x * x + y * y <= r * r * (1 + TIE_RTOL), geom.shape)
    return PhaseMask(geom, flags)


def build_triaxial_fiber_cell(r: float, resolution: int) -> PhaseMask:
    """Union of the three orthogonal cylinders of radius ``r`` through the center."""
    if not 0 < r < 0.5:
        raise ValueError(f"fiber radius must lie in (0, 1/2), got {r}")
    geom = CellGeometry.unit(3, resolution)
    _require_resolved(2 * r, geom, "fiber diameter", 3)
    x, y, z = geom.centers()
    r2 = r * r * (1 + TIE_RTOL)
    flags = (x * x + y * y <= r2) | (y * y + z * z <= r2) | (x * x + z * z <= r2)
    return PhaseMask(geom, np.broadcast_to(flags, geom.shape))


def build_laminate(axis: int, fraction: float, resolution: int, dim: int = 2) -> PhaseMask:
    """Layers stacked along ``e_axis`` (1-based); phase 2 fills the lower ``fraction``."""
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    if not 1 <= axis <= dim:
        raise ValueError(f"axis must be in 1..{dim}")
    geom = CellGeometry.unit(dim, resolution)
    c = geom.centers()[axis - 1]
    flags = np.broadcast_to(c + 0.5 <= fraction, geom.shape)
    return PhaseMask(geom, flags)


def build_checkerboard(resolution: int) -> PhaseMask:
    """2x2 checkerboard tiling of the unit square."""
    if resolution % 2:
        raise ValueError("checkerboard resolution must be even")
    geom = CellGeometry.unit(2, resolution)
    x, y = geom.centers()
    return PhaseMask(geom, (x < 0) ^ (y < 0))


def empty_mask(geometry: CellGeometry) -> PhaseMask:
    return PhaseMask(geometry, np.zeros(geometry.shape, dtype=bool))


# --- fields --------------------------------------------------------------------


def _check_h_dim(dim: int, h):
    if dim == 2 and np.ndim(h) != 0:
        raise ValueError("2D cell requires a scalar Hall parameter h")
    if dim == 3 and np.shape(h) != (3,):
        raise ValueError("3D cell requires a 3-vector Hall parameter h")


def assemble_conductivity(
    mask: PhaseMask, phase1: PerturbedPhase, phase2: PerturbedPhase, h
) -> ConductivityField:
    _check_h_dim(mask.geometry.dim, h)
    table = np.stack([perturbed_tensor(phase1, h), perturbed_tensor(phase2, h)])
    return ConductivityField(mask.geometry, table, mask.flat().astype(np.intp))


def two_phase_field(mask: PhaseMask, A1, A2) -> ConductivityField:
    """Field equal to ``A1`` off the mask and ``A2`` on it."""
    return ConductivityField(mask.geometry, np.stack([A1, A2]), mask.flat().astype(np.intp))


# --- HHOM-MASK v1 ----------------------------------------------------------------


def format_mask(mask: PhaseMask) -> str:
    g = mask.geometry
    keys = ["nx", "ny", "nz"][: g.dim]
    dims = " ".join(f"{k}={n}" for k, n in zip(keys, g.shape))
    lines = [MASK_MAGIC, f"d={g.dim} {dims} ell={g.ell!r}"]
    flags = mask.flags if g.dim == 3 else mask.flags[..., None]
    for iz in range(flags.shape[2]):
        for iy in range(flags.shape[1]):
            lines.append("".join("1" if v else "0" for v in flags[:, iy, iz]))
    return "\n".join(lines) + "\n"


def parse_mask(text: str) -> PhaseMask:
    if not text.endswith("\n"):
        raise MaskFormatError("missing trailing newline", text.count("\n") + 1)
    lines = text[:-1].split("\n")
    if lines[0].strip() != MASK_MAGIC:
        raise MaskFormatError(f"expected header {MASK_MAGIC!r}", 1)
    if len(lines) < 2:
        raise MaskFormatError("missing dimension line", 2)
    fields = {}
    for tok in lines[1].split():
        m = re.fullmatch(r"([a-z]+)=(\S+)", tok)
        if not m:
            raise MaskFormatError(f"malformed token {tok!r}", 2)
        fields[m.group(1)] = m.group(2)
    try:
        dim = int(fields.pop("d"))
    except (KeyError, ValueError):
        raise MaskFormatError("missing or invalid d=<2|3>", 2) from None
    if dim not in (2, 3):
        raise MaskFormatError(f"unsupported dimension d={dim}", 2)
    keys = ["nx", "ny", "nz"][:dim]
    try:
        shape = tuple(int(fields.pop(k)) for k in keys)
        ell = float(fields.pop("ell"))
    except KeyError as exc:
        raise MaskFormatError(f"missing key {exc.args[0]}", 2) from None
    except ValueError as exc:
        raise MaskFormatError(str(exc), 2) from None
    if fields:
        raise MaskFormatError(f"unknown keys {sorted(fields)}", 2)
    nx, ny = shape[0], shape[1]
    n_rows = ny * (shape[2] if dim == 3 else 1)
    rows = lines[2:]
    if len(rows) != n_rows:
        raise MaskFormatError(f"expected {n_rows} rows, found {len(rows)}", 2 + len(rows) + 1)
    data = np.zeros((n_rows, nx), dtype=bool)
    for k, row in enumerate(rows):
        if len(row) != nx or set(row) - {"0", "1"}:
            raise MaskFormatError(f"row must be {nx} characters of 0/1", k + 3)
        data[k] = np.frombuffer(row.encode(), dtype=np.uint8) == ord("1")
    extents = (ell,) + (1.0,) * (dim - 1)
    try:
        geom = CellGeometry(dim, extents, ny)
    except ValueError as exc:
        raise MaskFormatError(str(exc), 2) from None
    if geom.shape != shape:
        raise MaskFormatError(f"dimension mismatch: nx={nx} inconsistent with ell={ell}, ny={ny}", 2)
    flags = data.reshape((shape[2] if dim == 3 else 1, ny, nx)).transpose(2, 1, 0)
    if dim == 2:
        flags = flags[..., 0]
    return PhaseMask(geom, flags)


def write_mask(mask: PhaseMask, path) -> None:
    Path(path).write_text(format_mask(mask))


def read_mask(path) -> PhaseMask:
    return parse_mask(Path(path).read_text())


def resolution_for(feature: float, per_feature: int, cap: int | None = None) -> int:
    """Elements per unit length keeping ``per_feature`` elements across ``feature``."""
    res = max(MIN_RESOLUTION, math.ceil(per_feature / feature - 1e-9))
    return min(res, cap) if cap else res
