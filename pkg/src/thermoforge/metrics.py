"""Evaluation: pointwise error metrics, structural validity, the 2x2 study.

The structural-consistency check is the paper-style plausibility gate for
generated plates: binarize at 0.5, count hole figures under 4-connectivity,
and require exactly four of them with a total area inside the training
range widened by 5% on both ends. Components that touch the outer ring are
counted as figures but flagged separately.
"""

import json
from dataclasses import dataclass, asdict

import numpy as np
from scipy import ndimage

from .errors import MissingCell, ZeroReference, ZeroVariance

CELLS = ("AE+CNN", "AE+DeepONet", "VRRAE+CNN", "VRRAE+DeepONet")

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def mse(y_hat: np.ndarray, y: np.ndarray) -> float:
    y_hat, y = np.asarray(y_hat, float).ravel(), np.asarray(y, float).ravel()
    return float(np.mean((y - y_hat) ** 2))


def nmse(y_hat: np.ndarray, y: np.ndarray) -> float:
    """Squared error normalized by the reference variance around its mean."""
    y_hat, y = np.asarray(y_hat, float).ravel(), np.asarray(y, float).ravel()
    if y.size < 2:
        raise ZeroVariance("nmse needs at least 2 reference points")
    denom = float(np.sum((y - y.mean()) ** 2))
    if denom == 0.0:
        raise ZeroVariance("constant reference; nmse undefined")
    return float(np.sum((y - y_hat) ** 2) / denom)


def inf_nrm(y_hat: np.ndarray, y: np.ndarray) -> float:
    y_hat, y = np.asarray(y_hat, float).ravel(), np.asarray(y, float).ravel()
    scale = float(np.abs(y).max())
    if scale == 0.0:
        raise ZeroReference("reference sup-norm is zero; inf_nrm undefined")
    return float(np.abs(y - y_hat).max() / scale)


@dataclass
class ErrorStats:
    """mean +- std of the three metrics over a set of test samples."""

    mse_mean: float
    mse_std: float
    nmse_mean: float
    nmse_std: float
    inf_nrm_mean: float
    inf_nrm_std: float
    n_samples: int

    @classmethod
    def from_samples(cls, per_sample: dict) -> "ErrorStats":
        return cls(
            mse_mean=float(np.mean(per_sample["mse"])),
            mse_std=float(np.std(per_sample["mse"])),
            nmse_mean=float(np.mean(per_sample["nmse"])),
            nmse_std=float(np.std(per_sample["nmse"])),
            inf_nrm_mean=float(np.mean(per_sample["inf_nrm"])),
            inf_nrm_std=float(np.std(per_sample["inf_nrm"])),
            n_samples=len(per_sample["mse"]),
        )


def per_sample_errors(predictions, references, masks) -> dict:
    """Metric arrays over samples, each evaluated on solid pixels only."""
    out = {"mse": [], "nmse": [], "inf_nrm": []}
    for y_hat, y, solid in zip(predictions, references, masks):
        yh, yy = y_hat[solid], y[solid]
        out["mse"].append(mse(yh, yy))
        out["nmse"].append(nmse(yh, yy))
        out["inf_nrm"].append(inf_nrm(yh, yy))
    return out


@dataclass
class ValidityReport:
    figure_count: int
    area_fraction: float
    valid: bool
    reference_range: tuple[float, float]
    boundary_touching: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def hole_components(binary: np.ndarray) -> tuple[np.ndarray, int]:
    """Label 0-pixel components under 4-connectivity."""
    labels, n = ndimage.label(binary == 0, structure=_FOUR_CONN)
    return labels, int(n)


def binarize(soft: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Solid where the decoder output is >= threshold."""
    return (np.asarray(soft) >= threshold).astype(np.uint8)


def structural_consistency(raster_or_soft: np.ndarray,
                           reference_range: tuple[float, float],
                           tolerance: float = 0.05) -> ValidityReport:
    """Exactly-four-figures check with the widened training area band."""
    arr = np.asarray(raster_or_soft)
    binary = arr.astype(np.uint8) if arr.dtype == np.uint8 else binarize(arr)
    labels, n = hole_components(binary)

    ring = np.zeros(binary.shape, dtype=bool)
    ring[0, :] = ring[-1, :] = ring[:, 0] = ring[:, -1] = True
    touching = np.setdiff1d(np.unique(labels[ring]), [0])

    area_fraction = float((binary == 0).mean())
    lo, hi = reference_range
    in_range = lo * (1.0 - tolerance) <= area_fraction <= hi * (1.0 + tolerance)
    return ValidityReport(
        figure_count=n,
        area_fraction=area_fraction,
        valid=(n == 4) and in_range,
        reference_range=(float(lo), float(hi)),
        boundary_touching=int(touching.size),
    )


def reference_range_from_manifest(manifest) -> tuple[float, float]:
    af = manifest.area_fraction
    return (af["train_min"], af["train_max"])


def validity_rates(model, test_rasters: np.ndarray, reference_range,
                   n_pairs: int, n_samples: int, rng: np.random.Generator,
                   t_sampler=None) -> tuple[float, float]:
    """Valid-decode rates for latent interpolation and for prior sampling.

    ``t_sampler`` exists for tests (e.g. forcing endpoints); default draws
    t uniformly in (0, 1).
    """
    codes = model.project_batch(test_rasters)
    n_test = codes.shape[0]

    ok = 0
    for _ in range(n_pairs):
        a, b = rng.choice(n_test, size=2, replace=False)
        t = float(rng.uniform(0.0, 1.0)) if t_sampler is None else float(t_sampler(rng))
        alpha = (1.0 - t) * codes[a] + t * codes[b]
        decoded = model.decode(alpha)
        if structural_consistency(decoded, reference_range).valid:
            ok += 1
    interp_rate = ok / n_pairs

    ok = 0
    for alpha in model.sample_prior(rng, n_samples):
        decoded = model.decode(alpha)
        if structural_consistency(decoded, reference_range).valid:
            ok += 1
    random_rate = ok / n_samples
    return interp_rate, random_rate


def run_2x2_study(cell_predictors: dict, test_rasters, test_fields,
                  solid_masks) -> dict:
    """Crossed encoder x head comparison on a shared test set.

    ``cell_predictors`` maps each of the four cell names to a callable
    ``raster -> predicted field grid``; missing cells are an error.
    """
    missing = [c for c in CELLS if c not in cell_predictors]
    if missing:
        raise MissingCell(f"missing study cells: {', '.join(missing)}")

    study = {}
    for cell in CELLS:
        predict = cell_predictors[cell]
        predictions = [predict(r) for r in test_rasters]
        per_sample = per_sample_errors(predictions, test_fields, solid_masks)
        study[cell] = {
            "stats": ErrorStats.from_samples(per_sample),
            "per_sample": per_sample,
        }
    return study


def study_to_json(study: dict) -> str:
    payload = {
        cell: {
            "stats": asdict(entry["stats"]),
            "per_sample": {k: list(map(float, v)) for k, v in entry["per_sample"].items()},
        }
        for cell, entry in study.items()
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def study_table(study: dict) -> str:
    """Aligned plaintext table of mean +- std per cell, lower is better."""
    header = f"{'Model':<16} {'MSE':>24} {'NMSE':>24} {'inf_nrm':>20}"
    lines = [header, "-" * len(header)]
    for cell in CELLS:
        s = study[cell]["stats"]
        lines.append(
            f"{cell:<16} {s.mse_mean:>11.4e} ± {s.mse_std:<9.3e}"
            f" {s.nmse_mean:>11.4e} ± {s.nmse_std:<9.3e}"
            f" {s.inf_nrm_mean:>8.4f} ± {s.inf_nrm_std:<8.4f}"
        )
    return "\n".join(lines)
