"""Conversion of numeric results into JSON-safe Python values."""

from __future__ import annotations

import math

import numpy as np

SCHEMA = "ridge-mml/1"


def _number(x: float):
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return x


def clean(obj):
    """Recursively convert numpy values; non-finite floats become tokens.

    ``-inf`` and ``inf`` become strings and NaN becomes ``None`` so that the
    output never contains a bare NaN.
    """
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _number(float(obj))
    return obj
