import json
import os
from pathlib import Path

__version__ = "0.1.0"

# Geometric predicates use an absolute tolerance, comparisons of computed reals a relative one.
GEOM_ATOL = 1e-9
REL_TOL = 1e-6

BISECTION_ATOL = 1e-9
NORM_RESIDUAL = 1e-7
MONOTONE_TOL = 1e-7
MAX_BRACKET_STEPS = 60

QUADRATURE_CELLS = 4096
RICHARDSON_CELLS = 8192
RICHARDSON_TOL = 1e-6

MC_SAMPLES = 10**6
EMPIRICAL_SAMPLES = 10**5
DEFAULT_SEED = 20240501

GRID_2D = 720
GRID_3D = 2562

EXP_ARG_CAP = 700.0
PHI_SATURATION = 1e12

SIMPLIFY_AREA_BUDGET = 1e-9
CONFIG_SCHEMA_VERSION = 1

home = Path.home()
cache_path = Path(os.getenv("OLCB_CACHE_DIR", home / ".cache" / "olcb"))
config_path = Path(os.getenv("OLCB_CONFIG_DIR", home / ".config" / "olcb"))


def _load_settings() -> dict:
    """Load settings.json, returning empty dict if not found or invalid."""
    settings_file = config_path / "settings.json"
    if settings_file.exists():
        try:
            with open(settings_file) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError):
            return {}
        return data if isinstance(data, dict) else {}
    return {}


def get_threads() -> int:
    """Worker pool size: OLCB_THREADS, then settings file, then the CPU count."""
    env_threads = os.getenv("OLCB_THREADS")
    if env_threads:
        try:
            return max(1, int(env_threads))
        except ValueError:
            pass
    threads = _load_settings().get("threads")
    if isinstance(threads, int) and threads > 0:
        return threads
    return os.cpu_count() or 1


def get_mc_samples() -> int:
    """Monte Carlo sample count for volumes of sampled bodies."""
    return int(_load_settings().get("mc_samples", MC_SAMPLES))


def get_quadrature_cells() -> int:
    """Cell count for the Φ(λ) quadrature."""
    return int(_load_settings().get("quadrature_cells", QUADRATURE_CELLS))


def get_grid_size(dim: int) -> int:
    """Default direction-grid size for centroid bodies in dimension `dim`."""
    settings = _load_settings()
    if dim == 2:
        return int(settings.get("grid_2d", GRID_2D))
    return int(settings.get("grid_3d", GRID_3D))


def get_seed() -> int:
    return int(_load_settings().get("seed", DEFAULT_SEED))
