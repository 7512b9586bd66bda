"""Tsallis composition entropies and their linearly degenerate flows.

``S_q(theta) = q**(N-1) * (prod_k(1/q + theta_k) - q**-N)`` is evaluated in
the equivalent form ``sum_{j>=1} q**(j-1) e_j(theta)``, which is regular at
q = 0. Its partial derivatives ``prod_{j != k}(1 + q theta_j)`` are the
characteristic speeds of the flow conjugate to the q-temperature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CompositionMismatchError
from .numcore import ScalarField, VectorField, as_point, check_gap


@dataclass(frozen=True)
class TsallisEntropy:
    """S_q for a fixed composition parameter ``q`` (Tsallis index 1 - q)."""

    q: float

    def __call__(self, theta) -> float:
        return tsallis_entropy(self.q, theta)

    def gradient(self, theta) -> np.ndarray:
        return np.array(kernels.tsallis_gradient(self.q, as_point(theta)))

    def hessian(self, theta) -> np.ndarray:
        return np.array(kernels.tsallis_hessian(self.q, as_point(theta)))

    def third(self, theta) -> np.ndarray:
        """``T[i, j, k] = d_i d_j d_k S_q``; nonzero only for distinct indices."""
        x = as_point(theta)
        n = x.size
        out = np.zeros((n, n, n))
        if self.q == 0.0 or n < 3:
            return out
        fac = 1.0 + self.q * x
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    mask = np.ones(n, dtype=bool)
                    mask[[i, j, k]] = False
                    v = self.q * self.q * float(np.prod(fac[mask]))
                    for a, b, c in ((i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)):
                        out[a, b, c] = v
        return out

    def field(self) -> ScalarField:
        return ScalarField(self.__call__, self.gradient, self.hessian)

    def speeds(self) -> VectorField:
        """Characteristic speeds of the flow generated by this entropy."""
        return VectorField(self.gradient, self.hessian, self.third)


@dataclass(frozen=True)
class QTemperatureLabel:
    """Tag for the conjugate variable tau_q; q = 0 is the ordinary temperature."""

    q: float

    @property
    def is_temperature(self) -> bool:
        return self.q == 0.0

    def __str__(self) -> str:
        return "T" if self.is_temperature else f"tau_q[q={self.q:g}]"


def tsallis_entropy(q: float, theta) -> float:
    """Composite entropy of N phases; ``sum(theta)`` exactly when q == 0."""
    return kernels.tsallis_entropy(float(q), as_point(theta))


def tsallis_speed(q: float, theta, k: int) -> float:
    """``dS_q/dtheta_k``; independent of ``theta[k]``, identically 1 at q = 0."""
    x = as_point(theta)
    if not 0 <= k < x.size:
        raise IndexError(f"phase index {k} out of range for N={x.size}")
    return kernels.tsallis_gradient(float(q), x)[k]


def binary_compose(q: float, s1: float, s2: float) -> float:
    return s1 + s2 + q * s1 * s2


def split_phase(q: float, theta, j: int, parts, tol: float = 1e-12) -> np.ndarray:
    """Replace phase ``j`` by two sub-phases whose composition equals ``theta[j]``.

    The sub-phases are inserted in place of ``theta[j]``; S_q is unchanged.
    """
    x = as_point(theta)
    a, b = (float(v) for v in parts)
    defect = binary_compose(q, a, b) - x[j]
    if abs(defect) > tol * max(1.0, abs(x[j])):
        raise CompositionMismatchError(
            defect, f"parts ({a}, {b}) compose to {x[j] + defect!r}, not theta[{j}]={x[j]!r}")
    return np.concatenate([x[:j], [a, b], x[j + 1:]])


def epd_residual(field, theta, i: int, j: int) -> float:
    """``d_i d_j F - (d_j F - d_i F) / (theta_i - theta_j)``.

    ``field`` is a :class:`ScalarField` (analytic derivatives used when
    attached) or anything with ``gradient``/``hessian`` methods.
    """
    x = as_point(theta)
    if i == j:
        raise ValueError("epd_residual needs i != j")
    check_gap(x[i] - x[j], x, f"order parameters {i}, {j}")
    if not isinstance(field, ScalarField) and not hasattr(field, "hessian"):
        field = ScalarField(field)
    g = field.gradient(x)
    h = field.hessian(x)
    return float(h[i, j] - (g[j] - g[i]) / (x[i] - x[j]))
