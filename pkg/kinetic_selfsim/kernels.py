"""
Convolution of grid fields with homogeneous singular kernels.

Tables hold h^3 K(m h) for every offset m in [-(n-1), n-1]^3. The node m = 0
carries a cell weight chosen by SingularCellRule:

  lattice: removes the lattice-sum error of the constant Taylor term exactly,
           using the analytically continued Epstein zeta function of Z^3
  ball:    integral of the kernel over the ball with the cell's volume

Scalar power kernels also get the second-order (Laplacian) lattice correction
and odd vector kernels the first-order (gradient) one when the lattice rule is used.
"""
import logging
from functools import lru_cache
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import fft, special

from kinetic_selfsim.errors import ParameterError
from kinetic_selfsim.grid import GridSpec, gradient, laplacian
from kinetic_selfsim.models import SingularCellRule

logger = logging.getLogger(__name__)

KernelKind = Literal["power", "projected", "odd", "projected_gradient"]

# (i, j) pairs of the six stored components of a symmetric matrix kernel
SYM_PAIRS: Tuple[Tuple[int, int], ...] = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
ZETA_CUTOFF = 4


def upper_gamma(a: float, x: np.ndarray) -> np.ndarray:
    """Upper incomplete gamma function Gamma(a, x) for any real a and x > 0."""
    x = np.asarray(x, dtype=float)
    if a > 0:
        return special.gammaincc(a, x) * special.gamma(a)
    if a == 0:
        return special.exp1(x)
    return (upper_gamma(a + 1.0, x) - x ** a * np.exp(-x)) / a


@lru_cache(maxsize=256)
def epstein_zeta(s: float) -> float:
    """
    Sum over nonzero m in Z^3 of |m|^(-s), analytically continued to all s != 3

    Ewald splitting of the theta function at t = 1 gives
    pi^(-s/2) Gamma(s/2) Z(s) = sum' [G(s/2, pi m^2) + G((3-s)/2, pi m^2)] + 2/(s-3) - 2/s
    with G(a, x) = Gamma(a, x) x^(-a).
    """
    if s == 3.0:
        raise ParameterError("Epstein zeta has a pole at s = 3")
    if s == 0.0:
        return -1.0
    if s < 0 and float(s / 2.0).is_integer():
        return 0.0
    r = np.arange(-ZETA_CUTOFF, ZETA_CUTOFF + 1)
    m2 = (r[:, None, None] ** 2 + r[None, :, None] ** 2 + r[None, None, :] ** 2).ravel()
    m2 = m2[m2 > 0].astype(float)
    x = np.pi * m2
    total = 0.0
    for a in (s / 2.0, (3.0 - s) / 2.0):
        total += float(np.sum(upper_gamma(a, x) * x ** (-a)))
    total += 2.0 / (s - 3.0) - 2.0 / s
    return total * np.pi ** (s / 2.0) * float(special.rgamma(s / 2.0))


class KernelSpec(BaseModel):
    """
    Homogeneous kernel family

    power:              |z|^p
    projected:          (Id - z z^T/|z|^2) |z|^p, six symmetric components
    odd:                z |z|^p, three components
    projected_gradient: d/dz_k of the projected kernel, 3 x 6 components
    """

    model_config = ConfigDict(frozen=True)

    kind: KernelKind
    exponent: float
    scale: float = 1.0
    cell_rule: SingularCellRule = SingularCellRule.LATTICE
    lattice_correction: bool = True

    @property
    def components(self) -> int:
        return {"power": 1, "projected": 6, "odd": 3, "projected_gradient": 18}[self.kind]


def _offsets(grid: GridSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = np.arange(-(grid.n - 1), grid.n) * grid.spacing
    return np.meshgrid(m, m, m, indexing="ij")


def cell_weight(spec: KernelSpec, h: float) -> float:
    """Scalar weight of the m = 0 node for power-type kernels (before the 2/3 factor)."""
    p = spec.exponent
    if p <= -3.0:
        raise ParameterError(f"kernel exponent must exceed -3, got {p}")
    if spec.cell_rule == SingularCellRule.BALL:
        rho = (3.0 / (4.0 * np.pi)) ** (1.0 / 3.0) * h
        return 4.0 * np.pi * rho ** (p + 3.0) / (p + 3.0)
    return -h ** (3.0 + p) * epstein_zeta(-p)


def projection_pi(z: np.ndarray) -> np.ndarray:
    """Orthogonal projection Id - z z^T / |z|^2 onto the plane perpendicular to z, shape (..., 3, 3)."""
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    if np.any(r2 == 0.0):
        raise ParameterError("projection is undefined at z = 0; the cell weight covers that node")
    return np.eye(3) - z[..., :, None] * z[..., None, :] / r2[..., None, None]


@lru_cache(maxsize=16)
def kernel_table(spec: KernelSpec, grid: GridSpec) -> np.ndarray:
    """Table of h^3 K(m h), shape (components, 2n-1, 2n-1, 2n-1)."""
    X, Y, Z = _offsets(grid)
    h = grid.spacing
    r2 = X * X + Y * Y + Z * Z
    center = (grid.n - 1,) * 3
    r2[center] = 1.0
    r = np.sqrt(r2)
    p = spec.exponent
    coords = (X, Y, Z)
    vol = grid.cell_volume * spec.scale

    if spec.kind == "power":
        table = (vol * r ** p)[None]
        table[(0,) + center] = spec.scale * cell_weight(spec, h)
    elif spec.kind == "projected":
        base = vol * r ** p
        z = np.stack(coords, axis=-1)
        z[center] = (1.0, 0.0, 0.0)
        pi = projection_pi(z)
        table = np.empty((6,) + r.shape)
        for c, (i, j) in enumerate(SYM_PAIRS):
            table[c] = base * pi[..., i, j]
        w0 = spec.scale * cell_weight(spec, h) * 2.0 / 3.0
        for c, (i, j) in enumerate(SYM_PAIRS):
            table[(c,) + center] = w0 if i == j else 0.0
    elif spec.kind == "odd":
        table = np.stack([vol * coords[k] * r ** p for k in range(3)])
        table[(slice(None),) + center] = 0.0
    else:
        # d_k (Pi_ij |z|^q) = q d_ij z_k |z|^(q-2) - (d_ik z_j + d_jk z_i)|z|^(q-2) - (q-2) z_i z_j z_k |z|^(q-4)
        q = p
        rq2 = r ** (q - 2.0)
        rq4 = r ** (q - 4.0)
        table = np.empty((18,) + r.shape)
        for k in range(3):
            for c, (i, j) in enumerate(SYM_PAIRS):
                val = -(q - 2.0) * coords[i] * coords[j] * coords[k] * rq4
                if i == j:
                    val = val + q * coords[k] * rq2
                if i == k:
                    val = val - coords[j] * rq2
                if j == k:
                    val = val - coords[i] * rq2
                table[6 * k + c] = vol * val
        table[(slice(None),) + center] = 0.0
    return table


@lru_cache(maxsize=8)
def _table_spectrum(spec: KernelSpec, grid: GridSpec, size: int, workers: int) -> np.ndarray:
    return fft.rfftn(kernel_table(spec, grid), s=(size,) * 3, axes=(1, 2, 3), workers=workers)


def _lattice_correction(spec: KernelSpec, values: np.ndarray, grid: GridSpec) -> Optional[np.ndarray]:
    if spec.cell_rule != SingularCellRule.LATTICE or not spec.lattice_correction:
        return None
    h = grid.spacing
    p = spec.exponent
    if spec.kind == "power":
        w2 = -spec.scale * h ** (5.0 + p) * epstein_zeta(-p - 2.0) / 6.0
        return (w2 * laplacian(values, h))[None]
    if spec.kind == "odd":
        w1 = spec.scale * h ** (5.0 + p) * epstein_zeta(-p - 2.0) / 3.0
        return w1 * gradient(values, h)
    return None


def convolve(spec: KernelSpec, values: np.ndarray, grid: GridSpec, workers: Optional[int] = None) -> np.ndarray:
    """
    Discrete convolution sum_j T(i - j) f_j on the grid via zero-padded FFT

    Args:
        spec: Kernel family and cell rule
        values: Field values with the grid's shape
        grid: Grid of the field
        workers: Thread count handed to scipy.fft

    Returns:
        Array of shape (components, n, n, n)
    """
    if workers is None:
        from kinetic_selfsim.config import get_settings

        workers = get_settings().threads
    n = grid.n
    size = fft.next_fast_len(2 * n - 1, real=True)
    spectrum = _table_spectrum(spec, grid, size, workers)
    f_hat = fft.rfftn(values, s=(size,) * 3, workers=workers)
    full = fft.irfftn(spectrum * f_hat[None], s=(size,) * 3, axes=(1, 2, 3), workers=workers)
    out = full[:, n - 1:2 * n - 1, n - 1:2 * n - 1, n - 1:2 * n - 1].copy()
    correction = _lattice_correction(spec, values, grid)
    if correction is not None:
        out += correction
    return out


def direct_convolve_at(spec: KernelSpec, values: np.ndarray, grid: GridSpec, index: Tuple[int, int, int]) -> np.ndarray:
    """O(N) direct sum at a single node with the same table and corrections."""
    n = grid.n
    table = kernel_table(spec, grid)
    i, j, k = index
    window = table[:, i:i + n, j:j + n, k:k + n][:, ::-1, ::-1, ::-1]
    out = np.tensordot(window, values, axes=([1, 2, 3], [0, 1, 2]))
    correction = _lattice_correction(spec, values, grid)
    if correction is not None:
        out = out + correction[(slice(None), i, j, k)]
    return out


def symmetric_from_components(components: np.ndarray) -> np.ndarray:
    """(6, ...) stored components to a full (3, 3, ...) symmetric array."""
    out = np.empty((3, 3) + components.shape[1:])
    for c, (i, j) in enumerate(SYM_PAIRS):
        out[i, j] = components[c]
        out[j, i] = components[c]
    return out
