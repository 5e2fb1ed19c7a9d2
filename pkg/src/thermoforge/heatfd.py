"""Steady-state heat conduction on rasterized plates (ground-truth oracle).

Solves the 5-point Laplace system on solid pixels with Dirichlet data on the
outer ring and on hole pixels, then derives gradient-magnitude fields by
central differences (one-sided next to holes and at the plate edge). Direct
sparse factorization up to 16,384 unknowns, conjugate gradients above; the
contract is the relative residual, not the method.
"""

import struct
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergence, SingularSystem
from .geomgen import DatasetManifest, load_rasters

FIELD_MAGIC = b"TFF1"
TEMPERATURE = "temperature"
GRADIENT_MAGNITUDE = "gradient_magnitude"
_FIELD_KIND_CODE = {TEMPERATURE: 0, GRADIENT_MAGNITUDE: 1}
_FIELD_KIND_NAME = {v: k for k, v in _FIELD_KIND_CODE.items()}

# mask codes
INTERIOR = 0
BOUNDARY = 1
HOLE = 2

_DIRECT_LIMIT = 16_384


@dataclass
class ThermalConfig:
    """Material and boundary data. Density and heat capacity never enter the
    steady solve; they are kept for provenance of the physical setup."""

    T_outer: float = 100.0  # degC on the outer plate boundary
    T_hole: float = 0.0  # degC on the cooling holes
    conductivity: float = 237.0  # W/(m K)
    density: float = 2700.0  # kg/m^3
    heat_capacity: float = 900.0  # J/(kg K)
    plate_extent: float = 4.0  # meters per side
    target_field: str = GRADIENT_MAGNITUDE

    def __post_init__(self):
        if self.T_outer == self.T_hole:
            raise ValueError("T_outer == T_hole makes the field trivially constant")
        if self.conductivity <= 0:
            raise ValueError("conductivity must be positive")
        if self.target_field not in _FIELD_KIND_CODE:
            raise ValueError(f"unknown target_field {self.target_field!r}")

    @classmethod
    def paper_alt(cls, **kw) -> "ThermalConfig":
        """Variant with the plate edge held at 20 degC instead of 100."""
        return cls(T_outer=20.0, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ThermalConfig":
        return cls(**d)


@dataclass
class FieldGrid:
    """Scalar field on the raster grid plus a per-pixel role mask."""

    values: np.ndarray  # m x n float
    mask: np.ndarray  # m x n int8, INTERIOR/BOUNDARY/HOLE


@dataclass
class SolveReport:
    method: str
    n_unknowns: int
    residual: float
    wall_time_s: float
    iterations: int = 0


def classify_pixels(raster: np.ndarray) -> np.ndarray:
    """Pixel roles: outer ring -> BOUNDARY, zero pixels -> HOLE, rest INTERIOR."""
    m, n = raster.shape
    mask = np.full((m, n), INTERIOR, dtype=np.int8)
    mask[raster == 0] = HOLE
    mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = BOUNDARY
    return mask


def solve_dirichlet(mask: np.ndarray, dirichlet: np.ndarray, tol: float | None = None,
                    max_iter: int | None = None) -> tuple[FieldGrid, SolveReport]:
    """Solve the 5-point Laplace system with arbitrary Dirichlet data.

    ``dirichlet`` supplies values on BOUNDARY and HOLE pixels; INTERIOR
    pixels are unknowns. Holes that touch solid pixels only diagonally
    simply never appear in any stencil.
    """
    m, n = mask.shape
    interior = mask == INTERIOR
    n_unk = int(interior.sum())
    if n_unk == 0:
        raise SingularSystem("raster has no interior solid pixels")

    index = np.full((m, n), -1, dtype=np.int64)
    index[interior] = np.arange(n_unk)
    ii, jj = np.nonzero(interior)

    rows = [np.arange(n_unk)]
    cols = [np.arange(n_unk)]
    vals = [np.full(n_unk, 4.0)]
    b = np.zeros(n_unk)
    for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ni, nj = ii + di, jj + dj
        ncode = mask[ni, nj]
        free = ncode == INTERIOR
        rows.append(np.nonzero(free)[0])
        cols.append(index[ni[free], nj[free]])
        vals.append(np.full(int(free.sum()), -1.0))
        fixed = ~free
        np.add.at(b, np.nonzero(fixed)[0], dirichlet[ni[fixed], nj[fixed]])

    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_unk, n_unk),
    )

    t0 = time.perf_counter()
    iterations = 0
    if n_unk <= _DIRECT_LIMIT:
        method = "direct"
        tol = 1e-9 if tol is None else tol
        x = spla.spsolve(A.tocsc(), b)
    else:
        method = "cg"
        tol = 1e-7 if tol is None else tol
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.cg(A, b, rtol=tol * 1e-2, atol=0.0,
                          maxiter=max_iter or 20 * max(m, n), callback=cb)
        iterations = count[0]
    wall = time.perf_counter() - t0

    scale = float(np.abs(b).max()) or 1.0
    residual = float(np.abs(A @ x - b).max()) / scale
    if residual > tol:
        raise NoConvergence(f"relative residual {residual:.3e} exceeds {tol:.1e} ({method})")

    values = dirichlet.astype(np.float64).copy()
    values[interior] = x
    report = SolveReport(method=method, n_unknowns=n_unk, residual=residual,
                         wall_time_s=wall, iterations=iterations)
    return FieldGrid(values=values, mask=mask), report


def solve_steady(raster: np.ndarray, config: ThermalConfig,
                 tol: float | None = None) -> tuple[FieldGrid, SolveReport]:
    """Steady temperature on a plate raster (1 = solid, 0 = hole)."""
    mask = classify_pixels(raster)
    dirichlet = np.zeros(mask.shape)
    dirichlet[mask == BOUNDARY] = config.T_outer
    dirichlet[mask == HOLE] = config.T_hole
    return solve_dirichlet(mask, dirichlet, tol=tol)


def gradient_field(temperature: FieldGrid, config: ThermalConfig) -> FieldGrid:
    """|grad T| per pixel; exact for linear fields on central-difference pixels.

    Central differences wherever both neighbors are available and not hole
    pixels, one-sided next to holes and at the plate edge; hole pixels are 0.
    """
    V = temperature.values
    hole = temperature.mask == HOLE
    m, n = V.shape
    hx = config.plate_extent / (n - 1)
    hy = config.plate_extent / (m - 1)

    def axis_grad(h, axis):
        ok = ~hole
        left = np.zeros_like(V)
        left_ok = np.zeros_like(hole)
        right = np.zeros_like(V)
        right_ok = np.zeros_like(hole)
        sl_a = (slice(None), slice(1, None)) if axis == 1 else (slice(1, None), slice(None))
        sl_b = (slice(None), slice(None, -1)) if axis == 1 else (slice(None, -1), slice(None))
        left[sl_a] = V[sl_b]
        left_ok[sl_a] = ok[sl_b]
        right[sl_b] = V[sl_a]
        right_ok[sl_b] = ok[sl_a]
        central = left_ok & right_ok
        g = np.zeros_like(V)
        g[central] = (right[central] - left[central]) / (2 * h)
        fwd = right_ok & ~left_ok
        g[fwd] = (right[fwd] - V[fwd]) / h
        bwd = left_ok & ~right_ok
        g[bwd] = (V[bwd] - left[bwd]) / h
        return g

    gx = axis_grad(hx, axis=1)
    gy = axis_grad(hy, axis=0)
    mag = np.hypot(gx, gy)
    mag[hole] = 0.0
    return FieldGrid(values=mag, mask=temperature.mask.copy())


def target_from_raster(raster: np.ndarray, config: ThermalConfig,
                       tol: float | None = None) -> tuple[FieldGrid, SolveReport]:
    """Solve one raster and return the configured training target field."""
    temp, report = solve_steady(raster, config, tol=tol)
    if config.target_field == TEMPERATURE:
        return temp, report
    return gradient_field(temp, config), report


def write_field_file(path, fields: np.ndarray, kind: str) -> None:
    count, m, n = fields.shape
    with open(path, "wb") as f:
        f.write(FIELD_MAGIC)
        f.write(struct.pack("<III", count, m, n))
        f.write(struct.pack("<B", _FIELD_KIND_CODE[kind]))
        f.write(np.ascontiguousarray(fields, dtype="<f4").tobytes())


def read_field_file(path) -> tuple[np.ndarray, str]:
    with open(path, "rb") as f:
        if f.read(4) != FIELD_MAGIC:
            raise ValueError(f"{path}: not a TFF1 field file")
        count, m, n = struct.unpack("<III", f.read(12))
        kind = _FIELD_KIND_NAME[struct.unpack("<B", f.read(1))[0]]
        data = np.frombuffer(f.read(count * m * n * 4), dtype="<f4")
    return data.reshape(count, m, n).copy(), kind


def _subset_indices(manifest: DatasetManifest, subset_count: int) -> np.ndarray:
    """First samples of each split, preserving the 80/10/10 proportions."""
    if subset_count >= manifest.count:
        return np.arange(manifest.count)
    n_tr = int(round(0.8 * subset_count))
    n_v = int(round(0.1 * subset_count))
    quota = {"train": n_tr, "val": n_v, "test": subset_count - n_tr - n_v}
    picked = [manifest.sample_indices(split)[: quota[split]] for split in ("train", "val", "test")]
    return np.sort(np.concatenate(picked))


def solve_batch(manifest: DatasetManifest, manifest_dir, config: ThermalConfig,
                subset_count: int | None = None, tol: float | None = None,
                field_name: str = "fields.tff",
                manifest_name: str = "manifest.json") -> tuple[DatasetManifest, np.ndarray]:
    """Solve the target field for a split-proportional subset of the dataset.

    Failed samples are flagged in the manifest, never silently dropped.
    """
    manifest_dir = Path(manifest_dir)
    rasters = load_rasters(manifest, manifest_dir)
    chosen = _subset_indices(manifest, subset_count if subset_count is not None else manifest.count)

    fields = []
    field_indices: list = [None] * manifest.count
    failures = []
    for i in chosen:
        try:
            grid, _ = target_from_raster(rasters[i], config, tol=tol)
        except Exception as exc:  # per-sample failures are data, not crashes
            failures.append({"index": int(i), "error": type(exc).__name__, "message": str(exc)})
            continue
        field_indices[int(i)] = len(fields)
        fields.append(grid.values.astype(np.float32))

    stack = np.stack(fields) if fields else np.zeros((0, *rasters.shape[1:]), np.float32)
    write_field_file(manifest_dir / field_name, stack, config.target_field)
    manifest.field_file = field_name
    manifest.field_kind = config.target_field
    manifest.field_indices = field_indices
    manifest.solver_failures = failures
    manifest.save(manifest_dir / manifest_name)
    return manifest, stack
