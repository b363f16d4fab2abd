"""
Pseudospectral operators on a uniform periodic grid over ``[0, Lx) x [0, Ly)``.

Fields are flat arrays in C order of an ``(nx, ny)`` grid, ``x`` varying along the first axis.
All transforms are computed per call, so a grid can be shared between threads.
"""
from functools import cached_property
from typing import Tuple

import numpy as np
from attr import attrib, attrs, validators
from scipy import fft


def _even_and_large_enough(instance, attribute, value):
    if value < 16 or value % 2:
        raise ValueError(f"{attribute.name} must be even and at least 16, got {value}")


def _positive(instance, attribute, value):
    if not value > 0:
        raise ValueError(f"{attribute.name} must be positive, got {value}")


@attrs(frozen=True)
class TorusGrid:
    lx: float = attrib(validator=_positive)
    ly: float = attrib(validator=_positive)
    nx: int = attrib(validator=[validators.instance_of(int), _even_and_large_enough])
    ny: int = attrib(validator=[validators.instance_of(int), _even_and_large_enough])
    dealias: bool = attrib(default=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.nx, self.ny

    @property
    def node_count(self) -> int:
        return self.nx * self.ny

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @cached_property
    def weights(self) -> np.ndarray:
        return np.full(self.node_count, self.area / self.node_count)

    @cached_property
    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.nx) * (self.lx / self.nx)
        y = np.arange(self.ny) * (self.ly / self.ny)
        gx, gy = np.meshgrid(x, y, indexing="ij")
        return gx.ravel(), gy.ravel()

    @cached_property
    def points(self) -> np.ndarray:
        return np.column_stack(self.coordinates)

    @cached_property
    def _wavenumbers(self) -> Tuple[np.ndarray, np.ndarray]:
        kx = 2 * np.pi * fft.fftfreq(self.nx, d=self.lx / self.nx)
        ky = 2 * np.pi * fft.fftfreq(self.ny, d=self.ly / self.ny)
        return np.meshgrid(kx, ky, indexing="ij")

    @cached_property
    def _odd_wavenumbers(self) -> Tuple[np.ndarray, np.ndarray]:
        # the Nyquist mode has no well-defined odd derivative
        kx, ky = (k.copy() for k in self._wavenumbers)
        kx[self.nx // 2, :] = 0
        ky[:, self.ny // 2] = 0
        return kx, ky

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky = self._wavenumbers
        return kx ** 2 + ky ** 2

    @cached_property
    def _dealias_mask(self) -> np.ndarray:
        ix = np.abs(fft.fftfreq(self.nx) * self.nx)
        iy = np.abs(fft.fftfreq(self.ny) * self.ny)
        mx, my = np.meshgrid(ix < self.nx / 3, iy < self.ny / 3, indexing="ij")
        return mx & my

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        return fft.fft2(np.reshape(values, self.shape))

    def to_nodes(self, spectrum: np.ndarray) -> np.ndarray:
        return fft.ifft2(spectrum).real.ravel()

    def derivative(self, values: np.ndarray, order_x: int, order_y: int) -> np.ndarray:
        if order_x % 2 == 0 and order_y % 2 == 0:
            kx, ky = self._wavenumbers
        else:
            kx = self._odd_wavenumbers[0] if order_x % 2 else self._wavenumbers[0]
            ky = self._odd_wavenumbers[1] if order_y % 2 else self._wavenumbers[1]
        symbol = (1j * kx) ** order_x * (1j * ky) ** order_y
        return self.to_nodes(symbol * self.to_spectral(values))

    def gradient(self, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        spectrum = self.to_spectral(values)
        kx, ky = self._odd_wavenumbers
        return self.to_nodes(1j * kx * spectrum), self.to_nodes(1j * ky * spectrum)

    def laplace0(self, values: np.ndarray) -> np.ndarray:
        return self.to_nodes(-0.5 * self.k_squared * self.to_spectral(values))

    def bilaplace_real(self, values: np.ndarray) -> np.ndarray:
        return self.to_nodes(self.k_squared ** 2 * self.to_spectral(values))

    def grad_inner(self, f: np.ndarray, h: np.ndarray) -> np.ndarray:
        fx, fy = self.gradient(f)
        if f is h:
            return fx ** 2 + fy ** 2
        hx, hy = self.gradient(h)
        return fx * hx + fy * hy

    def solve_laplace0(self, rhs: np.ndarray) -> np.ndarray:
        """Zero-mean solution of ``laplace0(phi) = rhs - mean(rhs)``."""
        spectrum = self.to_spectral(rhs)
        symbol = -0.5 * self.k_squared
        symbol[0, 0] = 1.0
        spectrum = spectrum / symbol
        spectrum[0, 0] = 0.0
        return self.to_nodes(spectrum)

    def low_modes(self, count: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        The ``count`` smallest nonzero eigenvalues of ``-laplace0`` and real Fourier eigenfields (one per row,
        unit norm for ``weights``). Ties keep FFT index order, cosine before sine.
        """
        px, py = (p.ravel() for p in np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij"))
        index = px * self.ny + py
        conjugate = ((-px) % self.nx) * self.ny + (-py) % self.ny
        eigenvalues = 0.5 * self.k_squared.ravel()
        kept = np.flatnonzero((index > 0) & (index <= conjugate))
        kept = kept[np.lexsort((index[kept], eigenvalues[kept]))]
        x, y = self.coordinates
        kx, ky = (k.ravel() for k in self._wavenumbers)
        values, fields = [], []
        for m in kept:
            if len(values) >= count:
                break
            phase = kx[m] * x + ky[m] * y
            parts = [np.cos(phase)] if index[m] == conjugate[m] else [np.cos(phase), np.sin(phase)]
            for f in parts:
                values.append(eigenvalues[m])
                fields.append(f / np.sqrt(np.dot(self.weights, f ** 2)))
        return np.array(values[:count]), np.array(fields[:count])

    def solve_implicit_bilaplace(
        self, rhs: np.ndarray, coefficient: float
    ) -> np.ndarray:
        """Solves ``(1 + coefficient * lap_real^2) u = rhs``; diagonal in the Fourier basis."""
        spectrum = self.to_spectral(rhs) / (1.0 + coefficient * self.k_squared ** 2)
        return self.to_nodes(spectrum)

    def filter(self, values: np.ndarray) -> np.ndarray:
        if not self.dealias:
            return values
        return self.to_nodes(self._dealias_mask * self.to_spectral(values))

    def distance_from(self, point) -> np.ndarray:
        x, y = self.coordinates
        dx = np.abs(x - point[0]) % self.lx
        dy = np.abs(y - point[1]) % self.ly
        dx = np.minimum(dx, self.lx - dx)
        dy = np.minimum(dy, self.ly - dy)
        return np.hypot(dx, dy)

    @property
    def injectivity_radius(self) -> float:
        return 0.5 * min(self.lx, self.ly)
