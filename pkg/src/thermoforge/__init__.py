"""thermoforge: generative thermal design on plate geometries.

Pipeline: synthesize four-hole plates (`geomgen`), solve their steady heat
fields (`heatfd`), learn a structured 8-dim latent space (`vrrae`), predict
fields from codes (`deeponet`), evaluate (`metrics`), and drive everything
from the `thermoforge` CLI including the benchmark and the HTTP explorer
backend.
"""

from . import ckpt, deeponet, errors, geomgen, heatfd, metrics, ndmath, vrrae

__all__ = ["ckpt", "deeponet", "errors", "geomgen", "heatfd", "metrics", "ndmath", "vrrae"]
__version__ = "0.1.0"
