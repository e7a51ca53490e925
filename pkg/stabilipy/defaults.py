"""Default parameters, config files and named random streams."""
import zlib
from pathlib import Path

import numpy as np

from .exceptions import ConfigError

# Every tunable of the pipeline. Config files and command-line flags may
# override any of these; the type of the default decides how text values
# are coerced.
DEFAULTS = dict(
    k=50,
    s=50,
    knn=10,
    diameter=None,
    clusters=None,
    rho_threshold=0.9,
    fraction=0.01,
    seed=0,
    threads=1,
    oracle_cap=2000,
    krylov_m=10,
    tol=1e-8,
    solve_tol=1e-10,
    exact_cutoff=500,
    sigma=1e3,
    dmd_samples=100000,
    hidden=16,
)

# Parameters whose default is None still need a type for coercion.
_NONE_TYPES = dict(diameter=float, clusters=int)

STREAMS = ("eigensolver", "krylov", "knn", "model", "perturb", "sampling", "dmd", "dataset")


def _coerce(key: str, value: str):
    default = DEFAULTS[key]
    kind = _NONE_TYPES.get(key) if default is None else type(default)
    text = value.strip()
    if text.lower() in ("", "none"):
        return None
    try:
        if kind is int:
            return int(float(text)) if "e" in text.lower() else int(text)
        return kind(text)
    except ValueError as err:
        raise ConfigError(f"Value {value!r} for {key} is not a valid {kind.__name__}") from err


def read_config(path) -> dict:
    """Read a flat ``key=value`` config file.

    Blank lines and lines starting with ``#`` are ignored. Keys may use
    hyphens or underscores.

    Args:
        path: Path to the config file.

    Raises:
        ConfigError: A key is not in ``DEFAULTS`` or a line has no ``=``.

    Returns:
        dict: Parsed values, coerced to the type of each default.
    """
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r}. Allowed keys are {sorted(DEFAULTS)}"
            )
        values[key] = _coerce(key, value)
    return values


def resolve_config(file_values: dict = None, flag_values: dict = None) -> dict:
    """Merge defaults, config-file values and flag values, in that order.

    Flag values that are None are treated as "not given".
    """
    config = dict(DEFAULTS)
    for source in (file_values or {}, flag_values or {}):
        for key, value in source.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise ConfigError(f"Unknown configuration key {key!r}")
            if value is not None:
                config[key] = value
    return config


def rng(seed: int, stream: str) -> np.random.Generator:
    """Random generator for one named stream of a run.

    Streams are derived from the run seed and the stream name only, so
    adding a stream or a stage never changes the draws of another stream.
    """
    if stream not in STREAMS:
        raise ConfigError(f"Unknown random stream {stream!r}. Allowed streams are {STREAMS}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(stream.encode()),))
    return np.random.default_rng(sequence)
