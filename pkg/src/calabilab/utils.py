import hashlib
import json
from functools import lru_cache
from typing import Any, List, Optional, Tuple, Union, get_args, get_origin

import attr
from attr.exceptions import NotAnAttrsClassError

NoneType = type(None)
SUPPORTED_PRIMITIVES = {bool, int, float, str}
_SUPPORTED_PRIMITIVES = tuple(SUPPORTED_PRIMITIVES)


@attr.attrs(frozen=True)
class Field:
    name: str = attr.attrib()
    field_type: Any = attr.attrib()
    mandatory: bool = attr.attrib()
    init: bool = attr.attrib()
    validator: Optional[callable] = attr.attrib(default=None)
    converter: Optional[callable] = attr.attrib(default=None)


@lru_cache(None)
def get_fields(obj_type: type) -> List[Field]:
    try:
        attr.resolve_types(obj_type)
        return [
            Field(
                f.name,
                f.type,
                f.default is attr.NOTHING,
                f.init,
                f.validator,
                f.converter,
            )
            for f in attr.fields(obj_type)
        ]
    except (NotAnAttrsClassError, TypeError):
        pass
    raise TypeError(f"can only (de)serialize attrs classes, got {obj_type!r}")


def is_optional(t) -> bool:
    return get_origin(t) is Union and NoneType in get_args(t)


def normalize_type(t) -> Tuple[Optional[type], tuple]:
    """
    Splits a type hint into its runtime class and its generic arguments.
    ``Optional[X]`` normalizes to ``X``; ``Any`` and missing hints normalize to ``None``.
    """
    if t is Any:
        return None, tuple()
    if is_optional(t):
        return normalize_type(next(a for a in get_args(t) if a is not NoneType))
    origin = get_origin(t)
    if origin is not None:
        return origin, get_args(t)
    if t is None or isinstance(t, type):
        return t, tuple()
    raise TypeError(f"Found type annotation {t}, which is not a type and not a generic.")


def is_obj_supported_primitive(obj) -> bool:
    return isinstance(obj, _SUPPORTED_PRIMITIVES) or obj is None


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(data) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def join_path(path: str, key) -> str:
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else str(key)
