"""Scalar math that works on floats, numpy arrays, and dual numbers.

Vector fields are written against these helpers so one definition serves
plain evaluation, batched evaluation over grid nodes, and forward-mode
differentiation (objects exposing sqrt/sin/cos methods, e.g. Dual).
"""

from __future__ import annotations

import numpy as np

__all__ = ["sqrt", "sin", "cos"]


def sqrt(x):
    if hasattr(x, "sqrt"):
        return x.sqrt()
    return np.sqrt(x)


def sin(x):
    if hasattr(x, "sin"):
        return x.sin()
    return np.sin(x)


def cos(x):
    if hasattr(x, "cos"):
        return x.cos()
    return np.cos(x)
