"""Python bindings for the msq quantization library."""

from pathlib import Path

from ._core import (
    ConfigError,
    Error,
    InputError,
    NumericError,
    build_levels,
    emulate,
    partition,
    peak_throughput,
    project,
    quantize,
)
from ._core import characterize as _characterize

DEVICE_DB = Path(__file__).with_name("devices.json")


def characterize(device, devices=None, **kwargs):
    """Pick the fixed/SP2 core ratio for a device from the device database."""
    return _characterize(device, str(devices or DEVICE_DB), **kwargs)


__all__ = [
    "ConfigError",
    "DEVICE_DB",
    "Error",
    "InputError",
    "NumericError",
    "build_levels",
    "characterize",
    "emulate",
    "partition",
    "peak_throughput",
    "project",
    "quantize",
]
