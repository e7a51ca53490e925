"""File formats: SGMX matrices, feature and label files, JSON and tables."""
import json
import struct
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import FormatError

MAGIC = b"SGMX"
# magic, rows, cols, reserved (always 0); little-endian
_HEADER = struct.Struct("<4sIII")
FLOAT_FORMAT = "%.12g"


def write_matrix(path, matrix) -> None:
    """Write a 2-D float matrix in the SGMX binary format.

    The 16-byte header holds the magic ``SGMX``, the row and column counts
    as little-endian u32 and a reserved u32; row-major float64 data follows.
    """
    matrix = np.asarray(matrix, dtype="<f8")
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols, 0))
        fh.write(np.ascontiguousarray(matrix).tobytes(order="C"))


def read_matrix(path) -> np.ndarray:
    """Read an SGMX binary matrix.

    Raises:
        FormatError: Bad magic or a payload that does not match the header.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path} is too short for an SGMX header")
    magic, rows, cols, _ = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path} does not start with the SGMX magic")
    expected = _HEADER.size + 8 * rows * cols
    if len(raw) != expected:
        raise FormatError(f"{path} holds {len(raw)} bytes, header promises {expected}")
    return np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).astype(float)


def is_sgmx(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(4) == MAGIC


def _has_header(path) -> bool:
    with open(path) as fh:
        first = fh.readline().strip()
    try:
        [float(x) for x in first.split(",")]
    except ValueError:
        return True
    return False


def read_features(path) -> np.ndarray:
    """Read a feature matrix from CSV (header optional) or SGMX.

    Raises:
        FormatError: The matrix holds NaN, infinite or non-numeric values.
    """
    if is_sgmx(path):
        X = read_matrix(path)
    else:
        df = pd.read_csv(path, header=0 if _has_header(path) else None)
        try:
            X = df.to_numpy(dtype=float)
        except ValueError as err:
            raise FormatError(f"{path} contains non-numeric features") from err
    if not np.all(np.isfinite(X)):
        raise FormatError(f"{path} contains NaN or infinite values")
    return X


def write_features(path, X) -> None:
    pd.DataFrame(np.asarray(X, dtype=float)).to_csv(
        path, header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )


def read_labels(path) -> np.ndarray:
    """Read one integer label per line."""
    df = pd.read_csv(path, header=None, names=["label"], comment="#")
    if df["label"].isna().any():
        raise FormatError(f"{path} has empty label lines")
    return df["label"].to_numpy(dtype=np.int64)


def write_labels(path, labels) -> None:
    Path(path).write_text("".join(f"{int(x)}\n" for x in labels))


def to_jsonable(obj):
    """Convert numpy values and round floats to 12 significant digits.

    Non-finite floats become None so the output stays strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        if not np.isfinite(obj):
            return None
        return float(f"{float(obj):.12g}")
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_json(obj, path=None) -> str:
    """Serialize ``obj`` deterministically; write it when ``path`` is given."""
    text = json.dumps(to_jsonable(obj), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_json(path) -> dict:
    return json.loads(Path(path).read_text())


def sidecar(path) -> Path:
    """Path of the JSON sidecar that accompanies ``path``."""
    return Path(str(path) + ".json")


def write_table(df: pd.DataFrame, path) -> None:
    """Write a result table as CSV plus a JSON sidecar with rows and ``attrs``."""
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    dump_json({"rows": df.to_dict(orient="records"), "config": dict(sorted(df.attrs.items()))}, sidecar(path))
