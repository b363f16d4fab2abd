import math
import warnings
from enum import Enum
from pathlib import PurePath
from typing import Any, Callable, Dict, Iterable, Mapping, Optional, Union

import numpy as np

from .default_customs import (
    serialize_complex,
    serialize_ndarray,
    serialize_numpy_scalar,
    serialize_path,
)
from .utils import (
    Field,
    get_fields,
    is_obj_supported_primitive,
    normalize_type,
)

Json = Optional[Union[bool, int, float, str, list, Dict[str, Any]]]


class Serializer:
    def __init__(self) -> None:
        super().__init__()
        self._custom_serializers: Dict[type, Callable[[Any], Json]] = {
            complex: serialize_complex,
            np.ndarray: serialize_ndarray,
        }
        self._inheritance_serializers: Dict[type, Callable[[Any], Json]] = {
            np.generic: serialize_numpy_scalar,
            PurePath: serialize_path,
        }

    def serialize(self, obj) -> Json:
        """
        Serializes an attrs record (or a container of them) to a json-ready value.
        Non-finite floats become ``None`` so the output is strict JSON.

        :param obj: The object to serialize.
        """
        if is_obj_supported_primitive(obj):
            return _finite(obj)
        result = self._serialize(obj, inner=False)
        return _convert_to_json_serializable(result)

    def _serialize(self, obj, inner=True):
        if is_obj_supported_primitive(obj):
            return obj
        serialization_method = self._custom_serializers.get(type(obj))
        if serialization_method is None:
            for base_class, method in self._inheritance_serializers.items():
                if isinstance(obj, base_class):
                    serialization_method = method
                    break
        if serialization_method is not None:
            return serialization_method(obj)
        try:
            return self._serialize_attrs_class(obj)
        except TypeError:
            if isinstance(obj, Enum):
                return obj.name
            if isinstance(obj, Mapping):
                return {
                    str(k): self._serialize(v) for k, v in obj.items()
                }
            if isinstance(obj, Iterable) and not isinstance(obj, str):
                return [self._serialize(item) for item in obj]
            if not inner:
                raise
            return obj

    def _serialize_attrs_class(self, obj):
        fields = get_fields(type(obj))
        result = {
            f.name: self._serialize(getattr(obj, f.name)) for f in fields
        }
        self._warn_for_possible_problems_in_deserialization(obj, fields, result)
        return result

    @classmethod
    def _warn_for_possible_problems_in_deserialization(
        cls, obj, fields: Iterable[Field], data: Dict[str, Any]
    ) -> None:
        for f in fields:
            cls._check_for_unknown_dicts(f, data[f.name], obj.__class__.__name__)
            if f.converter is not None:
                cls._warn(
                    f'Field "{f.name}" in obj "{obj.__class__.__name__}" has a converter'
                )

    @classmethod
    def _check_for_unknown_dicts(cls, f, value, obj_class_name):
        try:
            real_type, _ = normalize_type(f.field_type)
        except TypeError:
            real_type = None
        if isinstance(value, dict) and real_type is None:
            cls._warn(
                f'Field "{f.name}" in obj "{obj_class_name}" is a dict or an instance and has no type hint'
            )

    @staticmethod
    def _warn(warning):
        warnings.warn(warning, RuntimeWarning, stacklevel=2)


def _finite(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _convert_to_json_serializable(obj) -> Json:
    if is_obj_supported_primitive(obj):
        return _finite(obj)
    if isinstance(obj, Mapping):
        return {key: _convert_to_json_serializable(value) for key, value in obj.items()}
    if isinstance(obj, Iterable):
        return [_convert_to_json_serializable(item) for item in obj]
    raise TypeError(
        f'Found object of type "{type(obj).__name__}" which cannot be serialized'
    )
