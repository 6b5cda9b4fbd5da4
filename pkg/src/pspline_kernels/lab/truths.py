"""Regression functions with exact derivatives of every order."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from ..exceptions import ConfigurationError


@dataclass(frozen=True)
class Truth:
    """A named regression function ``f`` with ``derivative(k, x) = f^(k)(x)``."""

    name: str
    func: Callable
    derivative: Callable
    description: str = ""

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))


def _trig(name, freq, amplitude=1.0, description=""):
    w = 2 * math.pi * freq

    def f(x):
        return amplitude * np.sin(w * np.asarray(x, dtype=float))

    def deriv(k, x):
        return amplitude * w ** k * np.sin(w * np.asarray(x, dtype=float) + k * math.pi / 2)

    return Truth(name, f, deriv, description)


def _poly(name, coef, description=""):
    p = Polynomial(coef)

    def f(x):
        return p(np.asarray(x, dtype=float))

    def deriv(k, x):
        q = p.deriv(k) if k else p
        return q(np.asarray(x, dtype=float)) + 0.0 * np.asarray(x, dtype=float)

    return Truth(name, f, deriv, description)


CATALOG = {
    t.name: t
    for t in [
        _trig("sin2pi", 1.0, description="sin(2 pi x)"),
        _trig("sin1pi", 0.5, description="sin(pi x)"),
        _poly("linear", [1.0, 2.0], description="1 + 2x"),
        _poly("quadratic", [0.5, -1.0, 1.5], description="0.5 - x + 1.5 x^2"),
        _poly("cubic", [0.2, 1.0, -3.0, 2.0], description="0.2 + x - 3x^2 + 2x^3"),
        _poly("quintic", [0.0, 1.0, -2.0, 4.0, -6.0, 3.0], description="x - 2x^2 + 4x^3 - 6x^4 + 3x^5"),
    ]
}


def get_truth(name: str) -> Truth:
    try:
        return CATALOG[name]
    except KeyError:
        raise ConfigurationError(f"unknown truth {name!r}; choose from {sorted(CATALOG)}") from None
