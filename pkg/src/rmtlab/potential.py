"""Polynomial potentials V(z) = v_1 z + v_2 z^2 + ... + v_p z^p.

The constant term is fixed at zero: an additive constant in V only rescales
every h_n by the same factor and never enters a recurrence coefficient,
density or kernel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial


@dataclass(frozen=True)
class Potential:
    """Real polynomial of even degree with positive leading coefficient.

    ``coeffs[j-1]`` is the coefficient of ``z**j``.
    """

    coeffs: tuple

    def __init__(self, coeffs: Sequence[float]):
        c = [float(v) for v in coeffs]
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        if not c:
            raise ValueError("empty potential")
        p = len(c)
        if p % 2 != 0 or c[-1] <= 0:
            raise ValueError(
                f"potential must have even degree and positive leading coefficient, got {c}"
            )
        object.__setattr__(self, "coeffs", tuple(c))

    # construction helpers

    @classmethod
    def gaussian(cls) -> "Potential":
        return cls([0.0, 1.0])

    @classmethod
    def quartic(cls, t: float, g: float = 1.0) -> "Potential":
        """The even quartic t z^2/2 + g z^4/4."""
        return cls([0.0, t / 2.0, 0.0, g / 4.0])

    @classmethod
    def parse(cls, text: str) -> "Potential":
        """Parse ``"v1,v2,...,vp"`` or a JSON array."""
        text = text.strip()
        if text.startswith("["):
            return cls(json.loads(text))
        return cls([float(s) for s in text.split(",") if s.strip()])

    def to_json(self) -> str:
        return json.dumps(list(self.coeffs))

    # polynomial arithmetic

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    @property
    def is_even(self) -> bool:
        return all(v == 0.0 for v in self.coeffs[0::2])

    def full_coeffs(self) -> np.ndarray:
        """Coefficients from degree 0 upward, constant included."""
        return np.concatenate(([0.0], self.coeffs))

    def as_polynomial(self) -> Polynomial:
        return Polynomial(self.full_coeffs())

    def __call__(self, x):
        x = np.asarray(x)
        acc = np.zeros_like(x, dtype=np.result_type(x, float))
        for v in reversed(self.coeffs):
            acc = (acc + v) * x
        return acc if acc.ndim else acc[()]

    def derivative(self) -> Polynomial:
        return self.as_polynomial().deriv()

    def deform(self, t: float) -> "Potential":
        """The Gaussian deformation (1 - 1/t) z^2 + V(z / sqrt(t)), t >= 1."""
        if t < 1:
            raise ValueError(f"deformation parameter must satisfy t >= 1, got {t}")
        inv_t = 1.0 / t
        inv_sqrt = 1.0 / math.sqrt(t)
        out = []
        for j, v in enumerate(self.coeffs, start=1):
            scale = inv_t ** (j // 2)
            if j % 2:
                scale *= inv_sqrt
            out.append(v * scale)
        out[1] += 1.0 - inv_t
        return Potential(out)

    def shifted(self, k: int, eps: float) -> "Potential":
        """V + eps z^k."""
        c = list(self.coeffs)
        while len(c) < k:
            c.append(0.0)
        c[k - 1] += eps
        return Potential(c)


def evaluate(V: Potential, x):
    return V(x)


def derivative(V: Potential) -> Polynomial:
    return V.derivative()


def deform(V: Potential, t: float) -> Potential:
    return V.deform(t)
