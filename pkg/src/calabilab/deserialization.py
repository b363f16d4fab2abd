import json
from enum import Enum
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    Mapping,
    Type,
    TypeVar,
)

import numpy as np

from .default_customs import deserialize_complex, deserialize_ndarray, deserialize_path
from .errors import ConfigError
from .utils import (
    get_fields,
    is_obj_supported_primitive,
    is_optional,
    join_path,
    normalize_type,
)

T = TypeVar("T")


class Deserializer:
    def __init__(self) -> None:
        super().__init__()
        self._custom_deserializers: Dict[type, Callable[[Any], Any]] = {
            complex: deserialize_complex,
            np.ndarray: deserialize_ndarray,
            Path: deserialize_path,
        }

    def deserialize(
        self, data, obj_type: Type[T], allow_extra_fields: bool = False
    ) -> T:
        """
        Builds an instance of ``obj_type`` from json data, relying on type hints only.

        :param data: The json data (as returned by ``json.load``).
        :param obj_type: The attrs class (or generic container type) to build.
        :param allow_extra_fields: Whether to ignore keys that are not fields of the target class instead of
            raising.
        :raises ConfigError: with the dotted path of the offending field.
        """
        return self._deserialize(data, obj_type, allow_extra_fields, "")

    def loads(self, text: str, obj_type: Type[T], allow_extra_fields: bool = False) -> T:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(e.msg, line=e.lineno, column=e.colno) from e
        return self.deserialize(data, obj_type, allow_extra_fields)

    def _deserialize(self, data, obj_type, allow_extra_fields, path):
        if data is None:
            if obj_type is None or obj_type is Any or is_optional(obj_type):
                return None
            raise ConfigError("value may not be null", path)

        try:
            real_type, generic_args = normalize_type(obj_type)
        except TypeError as e:
            raise ConfigError(str(e), path) from e

        method = self._custom_deserializers.get(real_type)
        if method is not None:
            try:
                return method(data)
            except (TypeError, ValueError, KeyError) as e:
                raise ConfigError(
                    f"cannot read {real_type.__name__}: {e}", path
                ) from e

        if real_type is None:
            return data
        if isinstance(real_type, type) and issubclass(real_type, Enum):
            return self._load_enum(data, real_type, path)
        if real_type in (bool, int, float, str):
            return self._load_primitive(data, real_type, path)
        try:
            fields = {f.name: f for f in get_fields(real_type)}
        except TypeError:
            if issubclass(real_type, Mapping):
                return self._load_mapping(
                    data, generic_args, allow_extra_fields, path
                )
            if real_type in (list, tuple, set, frozenset):
                return self._load_iterable(
                    data, real_type, generic_args, allow_extra_fields, path
                )
            raise ConfigError(f"unsupported target type {real_type!r}", path)

        if not isinstance(data, dict):
            raise ConfigError(
                f'expected an object for "{real_type.__name__}", got {type(data).__name__}',
                path,
            )
        data = dict(data)
        self._check_for_missing_fields(data, fields, real_type, path)
        self._check_for_extraneous_fields(
            data, fields, real_type, allow_extra_fields, path
        )
        kwargs = {
            key: self._deserialize(
                value, fields[key].field_type, allow_extra_fields, join_path(path, key)
            )
            for key, value in data.items()
        }
        try:
            return real_type(**{k: v for k, v in kwargs.items() if fields[k].init})
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), path) from e

    def _load_mapping(self, data, generic_args, allow_extra_fields, path):
        if not isinstance(data, dict):
            raise ConfigError(f"expected an object, got {type(data).__name__}", path)
        val_type = generic_args[1] if len(generic_args) > 1 else None
        return {
            k: self._deserialize(v, val_type, allow_extra_fields, join_path(path, k))
            for k, v in data.items()
        }

    def _load_iterable(self, data, real_type, generic_args, allow_extra_fields, path):
        if not isinstance(data, list):
            raise ConfigError(f"expected a list, got {type(data).__name__}", path)
        if real_type is tuple and generic_args and generic_args[-1] is not ...:
            if len(generic_args) != len(data):
                raise ConfigError(
                    f"expected {len(generic_args)} items, got {len(data)}", path
                )
            item_types = generic_args
        else:
            item_types = [generic_args[0] if generic_args else None] * len(data)
        return real_type(
            self._deserialize(item, t, allow_extra_fields, join_path(path, i))
            for i, (t, item) in enumerate(zip(item_types, data))
        )

    @staticmethod
    def _load_primitive(data, real_type, path):
        if not is_obj_supported_primitive(data) or isinstance(data, str) != (
            real_type is str
        ):
            raise ConfigError(
                f"expected {real_type.__name__}, got {type(data).__name__}", path
            )
        if real_type is bool:
            if not isinstance(data, bool):
                raise ConfigError(f"expected bool, got {type(data).__name__}", path)
            return data
        if isinstance(data, bool):
            raise ConfigError(f"expected {real_type.__name__}, got bool", path)
        if real_type is int:
            if isinstance(data, float) and not data.is_integer():
                raise ConfigError(f"expected int, got {data}", path)
            return int(data)
        return real_type(data)

    @staticmethod
    def _load_enum(data, real_type, path):
        value = data
        if isinstance(value, str):
            try:
                return real_type[value]
            except KeyError:
                for e in real_type:
                    if e.name.lower() == value.lower():
                        return e
        try:
            return real_type(value)
        except ValueError:
            names = ", ".join(e.name for e in real_type)
            raise ConfigError(f"{value!r} is not one of {names}", path)

    @staticmethod
    def _check_for_missing_fields(data, fields, obj_type, path):
        missing = sorted(
            name
            for name, field in fields.items()
            if name not in data and field.mandatory and field.init
        )
        if missing:
            missing_str = '", "'.join(missing)
            raise ConfigError(
                f'Missing fields "{missing_str}" for object type "{obj_type.__name__}"',
                path,
            )

    @staticmethod
    def _check_for_extraneous_fields(data, fields, obj_type, allow_extra_fields, path):
        extraneous = sorted(set(data.keys()).difference(fields))
        if extraneous and not allow_extra_fields:
            extraneous_str = '", "'.join(extraneous)
            raise ConfigError(
                f'Found extraneous fields "{extraneous_str}" for object type "{obj_type.__name__}"',
                join_path(path, extraneous[0]),
            )
        for e in extraneous:
            data.pop(e)
