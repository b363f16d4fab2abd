from pathlib import Path, PurePath

import numpy as np


def serialize_ndarray(a: np.ndarray) -> list:
    return a.tolist()


def deserialize_ndarray(data: list) -> np.ndarray:
    return np.asarray(data, dtype=float)


def serialize_numpy_scalar(x: np.generic):
    return x.item()


def serialize_complex(z: complex) -> dict:
    return {"re": z.real, "im": z.imag}


def deserialize_complex(d) -> complex:
    if isinstance(d, (int, float)):
        return complex(d)
    if isinstance(d, (list, tuple)):
        return complex(d[0], d[1])
    return complex(d["re"], d["im"])


def serialize_path(p: PurePath) -> str:
    return p.as_posix()


def deserialize_path(s: str) -> Path:
    return Path(s)
