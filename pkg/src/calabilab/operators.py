"""
Differential operators of a conformal metric ``g = exp(2u) g0``.

The Laplacian carries the factor convention ``laplace = 1/2 * Laplace-Beltrami``, so that
``K = (K0 - 2 laplace0(u)) exp(-2u)`` and the first eigenvalue of the round unit sphere is 1.
"""
from typing import Union

import numpy as np

from .errors import ContractViolation, UnsupportedOperation
from .surface import ConformalMetric, ScalarField, Surface, TensorField2


def curvature_values(surface: Surface, u: np.ndarray) -> np.ndarray:
    return (surface.background_curvature - 2 * surface.grid.laplace0(u)) * np.exp(-2 * u)


def _checked(surface: Surface, *fields: ScalarField) -> None:
    for f in fields:
        if not isinstance(f, ScalarField):
            raise ContractViolation(f"expected a ScalarField, got {type(f).__name__}")
        surface.check_same(f.surface)


def laplace0(surface: Surface, f: ScalarField) -> ScalarField:
    _checked(surface, f)
    return ScalarField(surface, surface.grid.laplace0(f.values))


def laplace_g(metric: ConformalMetric, f: ScalarField) -> ScalarField:
    surface = metric.surface
    _checked(surface, f)
    return ScalarField(surface, surface.grid.laplace0(f.values) * np.exp(-2 * metric.u.values))


def gauss_curvature(metric: ConformalMetric) -> ScalarField:
    return ScalarField(metric.surface, curvature_values(metric.surface, metric.u.values))


def grad_inner(metric: ConformalMetric, f: ScalarField, h: ScalarField) -> ScalarField:
    """Pointwise ``(grad f, grad h)_g``."""
    surface = metric.surface
    _checked(surface, f, h)
    inner0 = surface.grid.grad_inner(f.values, h.values)
    return ScalarField(surface, inner0 * np.exp(-2 * metric.u.values))


def grad_norm_sq(metric: ConformalMetric, f: ScalarField) -> ScalarField:
    return grad_inner(metric, f, f)


def integrate(metric: ConformalMetric, f: Union[ScalarField, float] = 1.0) -> float:
    """``int f dg`` by node quadrature; ``integrate(metric)`` is the area."""
    surface = metric.surface
    if isinstance(f, ScalarField):
        _checked(surface, f)
        values = f.values
    else:
        values = float(f)
    return float(np.dot(surface.weights, values * metric.density))


def _require_torus(surface: Surface, what: str) -> None:
    if not surface.is_torus:
        raise UnsupportedOperation(f"{what} is only available on the torus")


def lichnerowicz(metric: ConformalMetric, f: ScalarField) -> TensorField2:
    """
    ``f_{,zz} = d^2f/dz^2 - (df/dz)(d log F/dz)`` with ``F = exp(2u)`` and ``z = x + iy``.
    """
    surface = metric.surface
    _require_torus(surface, "the Lichnerowicz operator")
    _checked(surface, f)
    grid = surface.grid
    fx, fy = grid.gradient(f.values)
    ux, uy = grid.gradient(metric.u.values)
    fxx = grid.derivative(f.values, 2, 0)
    fxy = grid.derivative(f.values, 1, 1)
    fyy = grid.derivative(f.values, 0, 2)
    f_zz = 0.25 * (fxx - fyy - 2j * fxy)
    f_z = 0.5 * (fx - 1j * fy)
    log_density_z = ux - 1j * uy
    return TensorField2(surface, f_zz - f_z * log_density_z)


def lichnerowicz_norm_sq(metric: ConformalMetric, tensor: TensorField2) -> ScalarField:
    """Pointwise ``|L(f)|^2_g``; ``|dz (x) dz|^2_g = 4 exp(-4u)``."""
    surface = metric.surface
    surface.check_same(tensor.surface)
    return ScalarField(surface, 4 * np.abs(tensor.values) ** 2 * np.exp(-4 * metric.u.values))
