"""Synthetic plate geometries: four equal-size cooling holes on a solid plate.

Each raster is a binary m x n image (1 = solid plate, 0 = hole) carrying two
circles and two squares of equal size (circle radius = square half-side),
placed uniformly at random inside a margin box, pairwise separated so the
holes stay four distinct 4-connected figures. Datasets are bit-packed into a
`TGF1` file with a JSON manifest recording provenance, hashes and splits.
"""

import json
import struct
from dataclasses import dataclass, field, asdict
from hashlib import blake2b
from pathlib import Path

import numpy as np

from .errors import InfeasibleSpec, RetryExhausted

GEOMETRY_MAGIC = b"TGF1"
_NS_SAMPLE = 1
_NS_SPLIT = 2
_MAX_ATTEMPTS = 10_000

CIRCLE = "circle"
SQUARE = "square"


def derive_shape_size(grid_m: int, grid_n: int, total_hole_fraction: float = 0.06) -> int:
    """Smallest-error integer size so the four holes cover ~``total_hole_fraction``.

    Size is the circle radius and the square half-side; per-shape area is
    pi*s^2 (circle) or (2s+1)^2 (square).
    """
    target = total_hole_fraction * grid_m * grid_n
    best, best_err = 2, float("inf")
    for s in range(2, min(grid_m, grid_n) // 4 + 1):
        area = 2 * np.pi * s * s + 2 * (2 * s + 1) ** 2
        err = abs(area - target)
        if err < best_err:
            best, best_err = s, err
    return best


@dataclass
class GeometrySpec:
    """Parameters of the four-hole plate family."""

    grid_m: int = 128
    grid_n: int = 128
    plate_extent: float = 4.0  # meters per side
    n_circles: int = 2
    n_squares: int = 2
    shape_size: int | None = None  # None -> derived from hole_fraction
    hole_fraction: float = 0.06
    margin: int = 2
    seed: int = 0
    allow_overlap: bool = False

    def __post_init__(self):
        if self.grid_m < 16 or self.grid_n < 16:
            raise ValueError("grid must be at least 16x16")
        if self.shape_size is None:
            self.shape_size = derive_shape_size(self.grid_m, self.grid_n, self.hole_fraction)
        if self.shape_size < 2:
            raise ValueError("shape_size must be >= 2 px")
        if self.margin < 1:
            raise ValueError("margin must be >= 1 px")
        if self.n_circles + self.n_squares != 4:
            raise ValueError("exactly four shapes are supported")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeometrySpec":
        return cls(**d)


@dataclass
class ShapePlacement:
    kind: str  # circle | square
    center: tuple[int, int]  # (row, col)
    size: int  # circle radius == square half-side, pixels


def _local_mask(kind: str, size: int) -> np.ndarray:
    """Hole mask on the (2s+1)^2 bounding box, pixel-center convention."""
    s = size
    ii, jj = np.mgrid[-s : s + 1, -s : s + 1]
    if kind == CIRCLE:
        return (ii * ii + jj * jj) <= s * s
    return np.ones((2 * s + 1, 2 * s + 1), dtype=bool)


def _dilated_mask(kind: str, size: int) -> np.ndarray:
    """Local mask grown by one pixel in the 4-neighborhood.

    Two shapes whose plain masks avoid each other's dilated mask can never
    share a pixel or sit side-adjacent, so they stay distinct 4-connected
    figures.
    """
    m = _local_mask(kind, size)
    out = np.zeros((m.shape[0] + 2, m.shape[1] + 2), dtype=bool)
    out[1:-1, 1:-1] = m
    out[:-2, 1:-1] |= m
    out[2:, 1:-1] |= m
    out[1:-1, :-2] |= m
    out[1:-1, 2:] |= m
    return out


def place_shapes(spec: GeometrySpec, rng: np.random.Generator) -> list[ShapePlacement]:
    """Draw four non-overlapping placements inside the margin box.

    Raises InfeasibleSpec when the packing bound 4*(2*size+2*margin)^2 > m*n
    fails, RetryExhausted after 10,000 rejected draws.
    """
    s, margin = spec.shape_size, spec.margin
    if 4 * (2 * s + 2 * margin) ** 2 > spec.grid_m * spec.grid_n:
        raise InfeasibleSpec(
            f"4 shapes of size {s} with margin {margin} cannot pack a "
            f"{spec.grid_m}x{spec.grid_n} grid"
        )
    lo_r, hi_r = margin + s, spec.grid_m - 1 - margin - s
    lo_c, hi_c = margin + s, spec.grid_n - 1 - margin - s
    if hi_r < lo_r or hi_c < lo_c:
        raise InfeasibleSpec("margin box cannot hold a single shape")

    kinds = [CIRCLE] * spec.n_circles + [SQUARE] * spec.n_squares
    canvas = np.zeros((spec.grid_m, spec.grid_n), dtype=bool)
    placements: list[ShapePlacement] = []
    attempts = 0
    for kind in kinds:
        mask = _local_mask(kind, s)
        dil = _dilated_mask(kind, s)
        while True:
            if attempts >= _MAX_ATTEMPTS:
                raise RetryExhausted(f"no valid placement after {attempts} attempts")
            attempts += 1
            r = int(rng.integers(lo_r, hi_r + 1))
            c = int(rng.integers(lo_c, hi_c + 1))
            if not spec.allow_overlap:
                win = canvas[r - s - 1 : r + s + 2, c - s - 1 : c + s + 2]
                if (win & dil).any():
                    continue
            canvas[r - s : r + s + 1, c - s : c + s + 1] |= mask
            placements.append(ShapePlacement(kind=kind, center=(r, c), size=s))
            break
    return placements


def rasterize(placements: list[ShapePlacement], spec: GeometrySpec) -> np.ndarray:
    """Binary raster (uint8, 1 = solid) from four placements.

    A circle pixel is a hole iff its center lies within ``size`` of the
    shape center; a square pixel iff it lies in the closed axis-aligned box.
    """
    raster = np.ones((spec.grid_m, spec.grid_n), dtype=np.uint8)
    for p in placements:
        r, c = p.center
        s = p.size
        if r - s < spec.margin or r + s > spec.grid_m - 1 - spec.margin:
            raise ValueError(f"placement {p} violates the margin box")
        if c - s < spec.margin or c + s > spec.grid_n - 1 - spec.margin:
            raise ValueError(f"placement {p} violates the margin box")
        mask = _local_mask(p.kind, s)
        raster[r - s : r + s + 1, c - s : c + s + 1][mask] = 0
    return raster


def pack_raster(raster: np.ndarray) -> bytes:
    """Bit-pack one raster row-major, each row padded to a byte boundary."""
    return np.packbits(raster.astype(np.uint8), axis=1).tobytes()


def unpack_raster(buf: bytes, m: int, n: int) -> np.ndarray:
    rows = np.frombuffer(buf, dtype=np.uint8).reshape(m, -1)
    return np.unpackbits(rows, axis=1, count=n)


def content_hash(raster: np.ndarray) -> str:
    """64-bit content hash (hex) of the packed raster."""
    return blake2b(pack_raster(raster), digest_size=8).hexdigest()


def write_geometry_file(path, rasters: np.ndarray) -> None:
    count, m, n = rasters.shape
    with open(path, "wb") as f:
        f.write(GEOMETRY_MAGIC)
        f.write(struct.pack("<III", count, m, n))
        for i in range(count):
            f.write(pack_raster(rasters[i]))


def read_geometry_file(path) -> np.ndarray:
    """Load every raster of a TGF1 file as (count, m, n) uint8."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != GEOMETRY_MAGIC:
            raise ValueError(f"{path}: not a TGF1 geometry file")
        count, m, n = struct.unpack("<III", f.read(12))
        bytes_per = m * ((n + 7) // 8)
        buf = f.read(count * bytes_per)
    rows = np.frombuffer(buf, dtype=np.uint8).reshape(count, m, (n + 7) // 8)
    return np.unpackbits(rows, axis=2, count=n)


def _assign_split(count: int, seed: int) -> list[str]:
    """Seeded 80/10/10 split, proportions exact to +-1 sample."""
    n_train = int(round(0.8 * count))
    n_val = int(round(0.1 * count))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(_NS_SPLIT,)))
    perm = rng.permutation(count)
    tags = np.empty(count, dtype=object)
    tags[perm[:n_train]] = "train"
    tags[perm[n_train : n_train + n_val]] = "val"
    tags[perm[n_train + n_val :]] = "test"
    return list(tags)


@dataclass
class DatasetManifest:
    """Provenance record binding geometry/field files, splits and hashes."""

    spec: GeometrySpec
    count: int
    split: list[str]
    content_hashes: list[str]
    geometry_file: str
    field_file: str | None = None
    field_kind: str | None = None
    field_indices: list | None = None  # per-sample index into the field file, or None
    solver_failures: list = field(default_factory=list)
    area_fraction: dict = field(default_factory=dict)
    config_hash: str | None = None

    def sample_indices(self, split: str | None = None) -> np.ndarray:
        idx = np.arange(self.count)
        if split is None:
            return idx
        tags = np.array(self.split)
        return idx[tags == split]

    def manifest_hash(self) -> str:
        return blake2b(self.to_json().encode(), digest_size=8).hexdigest()

    def to_json(self) -> str:
        d = {
            "format": "thermoforge-manifest-v1",
            "spec": self.spec.to_dict(),
            "count": self.count,
            "split": self.split,
            "content_hashes": self.content_hashes,
            "geometry_file": self.geometry_file,
            "field_file": self.field_file,
            "field_kind": self.field_kind,
            "field_indices": self.field_indices,
            "solver_failures": self.solver_failures,
            "area_fraction": self.area_fraction,
            "config_hash": self.config_hash,
        }
        return json.dumps(d, indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        d = json.loads(Path(path).read_text())
        if d.get("format") != "thermoforge-manifest-v1":
            raise ValueError(f"{path}: unknown manifest format")
        return cls(
            spec=GeometrySpec.from_dict(d["spec"]),
            count=d["count"],
            split=d["split"],
            content_hashes=d["content_hashes"],
            geometry_file=d["geometry_file"],
            field_file=d.get("field_file"),
            field_kind=d.get("field_kind"),
            field_indices=d.get("field_indices"),
            solver_failures=d.get("solver_failures", []),
            area_fraction=d.get("area_fraction", {}),
            config_hash=d.get("config_hash"),
        )


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for sample ``index``; parallel == serial."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(_NS_SAMPLE, index)))


def generate_rasters(spec: GeometrySpec, count: int) -> tuple[np.ndarray, list[str]]:
    """``count`` globally unique rasters plus their content hashes."""
    rasters = np.empty((count, spec.grid_m, spec.grid_n), dtype=np.uint8)
    hashes: list[str] = []
    seen: set[str] = set()
    for i in range(count):
        rng = sample_rng(spec.seed, i)
        for _ in range(_MAX_ATTEMPTS):
            raster = rasterize(place_shapes(spec, rng), spec)
            h = content_hash(raster)
            if h not in seen:
                break
        else:
            raise RetryExhausted(f"could not find a unique raster for sample {i}")
        seen.add(h)
        rasters[i] = raster
        hashes.append(h)
    return rasters, hashes


def generate_dataset(spec: GeometrySpec, count: int, out_dir,
                     geometry_name: str = "geometry.tgf",
                     manifest_name: str = "manifest.json",
                     config_hash: str | None = None) -> DatasetManifest:
    """Generate, persist and describe a dataset of ``count`` unique plates."""
    if count < 10:
        raise ValueError("count must be >= 10")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rasters, hashes = generate_rasters(spec, count)
    split = _assign_split(count, spec.seed)

    fractions = 1.0 - rasters.reshape(count, -1).mean(axis=1)
    train_frac = fractions[np.array(split) == "train"]
    area_fraction = {
        "train_min": float(train_frac.min()),
        "train_max": float(train_frac.max()),
        "train_mean": float(train_frac.mean()),
    }

    write_geometry_file(out_dir / geometry_name, rasters)
    manifest = DatasetManifest(
        spec=spec,
        count=count,
        split=split,
        content_hashes=hashes,
        geometry_file=geometry_name,
        area_fraction=area_fraction,
        config_hash=config_hash,
    )
    manifest.save(out_dir / manifest_name)
    return manifest


def load_rasters(manifest: DatasetManifest, manifest_dir) -> np.ndarray:
    """Rasters referenced by a manifest (paths are relative to its directory)."""
    return read_geometry_file(Path(manifest_dir) / manifest.geometry_file)
