"""Closed-form isotropic Gaussian mixtures used as test densities and oracles."""
import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import special, stats

from kinetic_selfsim.errors import ParameterError
from kinetic_selfsim.grid import GridSpec, ScalarField

logger = logging.getLogger(__name__)


class GaussianMixture(BaseModel):
    """f(v) = sum_m weight_m * N(v; center_m, width_m^2 Id)."""

    model_config = ConfigDict(frozen=True)

    centers: List[List[float]]
    widths: List[float]
    weights: List[float]

    @model_validator(mode="after")
    def _check(self) -> "GaussianMixture":
        if not (len(self.centers) == len(self.widths) == len(self.weights)) or not self.widths:
            raise ValueError("centers, widths and weights must be non-empty and equally long")
        if any(len(c) != 3 for c in self.centers):
            raise ValueError("centers must be three-dimensional")
        if any(w <= 0 for w in self.widths):
            raise ValueError("widths must be positive")
        return self

    @classmethod
    def maxwellian(cls, mass: float = 1.0, width: float = 1.0, center: Sequence[float] = (0.0, 0.0, 0.0)) -> "GaussianMixture":
        return cls(centers=[list(center)], widths=[width], weights=[mass])

    def _components(self):
        for c, s, m in zip(self.centers, self.widths, self.weights):
            yield np.asarray(c, dtype=float), float(s), float(m)

    @staticmethod
    def _gauss(d2: np.ndarray, s: float) -> np.ndarray:
        return np.exp(-0.5 * d2 / (s * s)) / (2.0 * np.pi * s * s) ** 1.5

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1])
        for c, s, m in self._components():
            d = pts - c
            out += m * self._gauss(np.sum(d * d, axis=-1), s)
        return out

    def gradient(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape)
        for c, s, m in self._components():
            d = pts - c
            g = m * self._gauss(np.sum(d * d, axis=-1), s)
            out -= (g / (s * s))[..., None] * d
        return out

    def hessian(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape + (3,))
        eye = np.eye(3)
        for c, s, m in self._components():
            d = pts - c
            g = m * self._gauss(np.sum(d * d, axis=-1), s)
            outer = d[..., :, None] * d[..., None, :] / s ** 4 - eye / (s * s)
            out += g[..., None, None] * outer
        return out

    def on_grid(self, grid: GridSpec) -> ScalarField:
        X, Y, Z = grid.mesh()
        return ScalarField(grid=grid, values=self(np.stack([X, Y, Z], axis=-1)))

    @property
    def mass(self) -> float:
        return float(sum(self.weights))

    def momentum(self) -> np.ndarray:
        return sum(m * c for c, _, m in self._components())

    def energy(self) -> float:
        """Second moment integral |v|^2 f."""
        return float(sum(m * (c @ c + 3.0 * s * s) for c, s, m in self._components()))

    def riesz_potential(self, points: np.ndarray, exponent: float) -> np.ndarray:
        """
        Integral of |z|^p f(v - z) dz at each point, p > -3

        Uses E|X|^p for X ~ N(mu, s^2 Id):
        s^p 2^(p/2) Gamma((3+p)/2) / Gamma(3/2) * 1F1(-p/2; 3/2; -|mu|^2 / (2 s^2)).
        """
        if exponent <= -3.0:
            raise ParameterError(f"Riesz exponent must exceed -3, got {exponent}")
        pts = np.asarray(points, dtype=float)
        p = exponent
        out = np.zeros(pts.shape[:-1])
        pref = 2.0 ** (p / 2.0) * special.gamma((3.0 + p) / 2.0) / special.gamma(1.5)
        for c, s, m in self._components():
            d = pts - c
            x = np.sum(d * d, axis=-1) / (2.0 * s * s)
            out += m * s ** p * pref * special.hyp1f1(-p / 2.0, 1.5, -x)
        return out

    def landau_coefficient(self, points: np.ndarray, exponent: float, nodes: int = 96) -> np.ndarray:
        """
        Integral of (Id - z z^T/|z|^2)|z|^p f(v - z) dz, shape (..., 3, 3)

        Per component the result is alpha(r) Id + beta(r) d d^T / r^2 with d the offset
        to the center. The trace is twice the Riesz potential; the d-d entry reduces,
        after the polar-angle integral, to a radial integral done by Gauss-Legendre
        on a table of r values that is then interpolated.
        """
        pts = np.asarray(points, dtype=float)
        p = exponent
        out = np.zeros(pts.shape + (3,))
        x_gl, w_gl = np.polynomial.legendre.leggauss(nodes)
        for c, s, m in self._components():
            d = pts - c
            rho = np.sqrt(np.sum(d * d, axis=-1))
            table = np.linspace(0.0, max(float(rho.max(initial=0.0)), s), 513)
            lo = np.maximum(table - 10.0 * s, 0.0)[:, None]
            hi = (table + 10.0 * s)[:, None]
            r = 0.5 * (hi - lo) * x_gl[None] + 0.5 * (hi + lo)
            rt = table[:, None]
            kappa = rt * r / (s * s)
            near = np.exp(-0.5 * (rt - r) ** 2 / (s * s))
            far = np.exp(-0.5 * (rt + r) ** 2 / (s * s))
            safe = np.where(kappa > 1e-3, kappa, 1.0)
            # exp(-(rho^2 + r^2)/2s^2) times the integral of (1 - mu^2) exp(kappa mu) over [-1, 1]
            angular = np.where(
                kappa > 1e-3,
                (2.0 / safe ** 2) * ((near + far) - (near - far) / safe),
                np.exp(-0.5 * (rt * rt + r * r) / (s * s)) * (4.0 / 3.0 + 2.0 * kappa ** 2 / 15.0),
            )
            integrand = r ** (p + 2.0) * angular
            along = 2.0 * np.pi * m * np.sum(integrand * w_gl[None], axis=1) * 0.5 * (hi - lo)[:, 0]
            along /= (2.0 * np.pi * s * s) ** 1.5
            pref = 2.0 ** (p / 2.0) * special.gamma((3.0 + p) / 2.0) / special.gamma(1.5)
            trace = 2.0 * m * s ** p * pref * special.hyp1f1(-p / 2.0, 1.5, -table ** 2 / (2.0 * s * s))
            alpha = 0.5 * (trace - along)
            beta = along - alpha
            a_r = np.interp(rho, table, alpha)
            b_r = np.interp(rho, table, beta)
            with np.errstate(invalid="ignore", divide="ignore"):
                unit = np.where(rho[..., None] > 0, d / rho[..., None], 0.0)
            out += a_r[..., None, None] * np.eye(3) + b_r[..., None, None] * unit[..., :, None] * unit[..., None, :]
        return out

    def coulomb_field(self, points: np.ndarray) -> np.ndarray:
        """Integral of (x - z)/|x - z|^3 f(z) dz, i.e. enclosed mass over r^2 per component."""
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape)
        for c, s, m in self._components():
            d = pts - c
            r = np.sqrt(np.sum(d * d, axis=-1))
            enclosed = special.gammainc(1.5, r * r / (2.0 * s * s))
            with np.errstate(invalid="ignore", divide="ignore"):
                scale = np.where(r > 0, m * enclosed / r ** 3, 0.0)
            out += scale[..., None] * d
        return out

    def enclosed_mass(self, radius: float, center: Sequence[float] = (0.0, 0.0, 0.0)) -> float:
        total = 0.0
        c0 = np.asarray(center, dtype=float)
        for c, s, m in self._components():
            nc = float(np.sum((c - c0) ** 2)) / (s * s)
            x = radius * radius / (s * s)
            cdf = stats.chi2.cdf(x, df=3) if nc == 0.0 else stats.ncx2.cdf(x, df=3, nc=nc)
            total += m * float(cdf)
        return total

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        probs = np.asarray(self.weights) / self.mass
        which = rng.choice(len(self.weights), size=size, p=probs)
        centers = np.asarray(self.centers)[which]
        widths = np.asarray(self.widths)[which]
        return centers + widths[:, None] * rng.standard_normal((size, 3))


def random_mixture(
    rng: np.random.Generator,
    components: int = 3,
    center_scale: float = 1.0,
    width_range: Sequence[float] = (0.5, 1.5),
    weight_range: Sequence[float] = (0.2, 1.0),
) -> GaussianMixture:
    centers = rng.uniform(-center_scale, center_scale, size=(components, 3))
    widths = rng.uniform(width_range[0], width_range[1], size=components)
    weights = rng.uniform(weight_range[0], weight_range[1], size=components)
    return GaussianMixture(centers=centers.tolist(), widths=widths.tolist(), weights=weights.tolist())
