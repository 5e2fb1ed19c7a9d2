"""Pipeline configuration: defaults, dotted key=value files, content hashes.

Config files are plain text, one ``section.key = value`` per line with ``#``
comments; values are parsed as JSON scalars when possible. Flags win over
the file, the file wins over defaults.
"""

import json
from copy import deepcopy
from hashlib import blake2b, sha256
from pathlib import Path

DEFAULTS = {
    "seed": 0,
    "out": "runs",
    "geometry": {
        "count": 2000,
        "m": 64,
        "n": 64,
        "shape_size": None,
        "hole_fraction": 0.06,
        "margin": 2,
    },
    "thermal": {
        "T_outer": 100.0,
        "T_hole": 0.0,
        "conductivity": 237.0,
        "density": 2700.0,
        "heat_capacity": 900.0,
        "plate_extent": 4.0,
        "target": "grad",
        "subset": 500,
        "tol": None,
    },
    "vrrae": {
        "steps": 20000,
        "batch_size": 64,
        "lr": 1e-4,
        "lr_final": None,
        "beta_final": 0.2,
        "anneal_frac": 0.5,
        "k_star": 8,
        "latent_width": 64,
    },
    "deeponet": {
        "epochs": 30,
        "batch_size": 10000,
        "lr": 1e-3,
    },
    "cnn": {
        "epochs": 30,
        "batch_size": 32,
        "lr": 1e-3,
    },
    "eval": {
        "n_pairs": 500,
        "n_samples": 500,
    },
    "serve": {
        "host": "127.0.0.1",
        "port": 8777,
    },
    "bench": {
        "grid": 128,
        "n_samples": 50,
        "warmup": 3,
    },
}


def _parse_value(raw: str):
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(path=None) -> dict:
    """Defaults overlaid with a dotted key=value config file."""
    cfg = deepcopy(DEFAULTS)
    if path is None:
        return cfg
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, raw = line.split("=", 1)
        parts = key.strip().split(".")
        node = cfg
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = _parse_value(raw)
    return cfg


def override(cfg: dict, section: str | None, key: str, value):
    """Apply one flag override (None means the flag was not given)."""
    if value is None:
        return
    if section is None:
        cfg[key] = value
    else:
        cfg.setdefault(section, {})[key] = value


def config_hash(cfg: dict) -> str:
    return blake2b(json.dumps(cfg, sort_keys=True).encode(), digest_size=8).hexdigest()


def file_hash(path) -> str:
    """Content hash of an input artifact for the run log."""
    return sha256(Path(path).read_bytes()).hexdigest()[:16]
