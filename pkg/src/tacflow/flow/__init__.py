"""Dense inverse-search optical flow and its support machinery."""

from .backend import available_backends, default_backend, get_kernels
from .core import (
    FlowField,
    FlowParams,
    build_pyramid,
    endpoint_error,
    max_pyramid_levels,
)
from .dis import DEFAULT_PARAMS, dis_flow
from .io import FLOW_CSV_HEADER, flow_csv_lines, read_flow, write_flow

__all__ = [
    "DEFAULT_PARAMS",
    "FLOW_CSV_HEADER",
    "FlowField",
    "FlowParams",
    "available_backends",
    "build_pyramid",
    "default_backend",
    "dis_flow",
    "endpoint_error",
    "flow_csv_lines",
    "get_kernels",
    "max_pyramid_levels",
    "read_flow",
    "write_flow",
]
