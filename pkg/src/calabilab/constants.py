import math

FORMAT_VERSION = 1
FIELD_DTYPE = "f64le"
PAYLOAD_SUFFIX = ".f64"
MANIFEST_SUFFIX = ".json"

# concentration thresholds for E(p) * A(p)
GENERAL_CONCENTRATION_THRESHOLD = 4 * math.pi ** 2
SHARP_CONCENTRATION_THRESHOLD = 16 * math.pi ** 2

TRACE_COLUMNS = (
    "t",
    "area",
    "calabi",
    "mabuchi_closed",
    "mabuchi_integrated",
    "liouville",
    "gradk",
    "lambda1",
    "kw_residual",
    "dt",
    "tail_length_increment",
    "calabi_integral",
    "gradk_integral",
)
