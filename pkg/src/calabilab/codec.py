from .deserialization import Deserializer
from .serialization import Serializer

_default_serializer = Serializer()
serialize = _default_serializer.serialize

_default_deserializer = Deserializer()
deserialize = _default_deserializer.deserialize
loads = _default_deserializer.loads
