import json
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.ndimage import map_coordinates

from kinetic_selfsim.errors import GridError, ParameterError, UnsupportedWeightError

logger = logging.getLogger(__name__)

WeightPolynomial = Dict[Tuple[int, int, int], float]

WEIGHT_ONE: WeightPolynomial = {(0, 0, 0): 1.0}
WEIGHT_ENERGY: WeightPolynomial = {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0}
WEIGHT_QUARTIC: WeightPolynomial = {
    (4, 0, 0): 1.0, (0, 4, 0): 1.0, (0, 0, 4): 1.0,
    (2, 2, 0): 2.0, (2, 0, 2): 2.0, (0, 2, 2): 2.0,
}
MAX_WEIGHT_DEGREE = 4


def weight_momentum(axis: int) -> WeightPolynomial:
    exps = [0, 0, 0]
    exps[axis] = 1
    return {tuple(exps): 1.0}


class GridSpec(BaseModel):
    """Uniform vertex grid on [-L, L)^3 with nodes x_i = -L + i*h, h = 2L/n."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=8)
    extent: float = Field(..., gt=0)

    @field_validator("n")
    @classmethod
    def _even(cls, v: int) -> int:
        if v % 2:
            raise ValueError(f"n must be even, got {v}")
        return v

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def origin_index(self) -> int:
        return self.n // 2

    def axis(self) -> np.ndarray:
        return -self.extent + self.spacing * np.arange(self.n)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = self.axis()
        return tuple(np.meshgrid(x, x, x, indexing="ij"))

    def nodes(self) -> np.ndarray:
        """Node coordinates as an (n, n, n, 3) array."""
        return np.stack(self.mesh(), axis=-1)

    def points(self) -> np.ndarray:
        """Node coordinates as an (n^3, 3) array in C order of [ix, iy, iz]."""
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    def radius(self, center: Optional[Sequence[float]] = None) -> np.ndarray:
        X, Y, Z = self.mesh()
        if center is not None:
            X, Y, Z = X - center[0], Y - center[1], Z - center[2]
        return np.sqrt(X * X + Y * Y + Z * Z)

    def scaled(self, factor: float) -> "GridSpec":
        return GridSpec(n=self.n, extent=self.extent * factor)


class ScalarField(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: GridSpec
    values: np.ndarray

    @model_validator(mode="after")
    def _check_shape(self) -> "ScalarField":
        if self.values.shape != self.grid.shape:
            raise GridError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")
        return self

    def like(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(grid=self.grid, values=values)

    def integrate(self, weight: Optional[WeightPolynomial] = None) -> float:
        return integrate(self, weight)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


class MatrixField(BaseModel):
    """Symmetric 3x3 matrix per node, stored as values[i, j, ix, iy, iz]."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: GridSpec
    values: np.ndarray

    @model_validator(mode="after")
    def _check_shape(self) -> "MatrixField":
        if self.values.shape != (3, 3) + self.grid.shape:
            raise GridError(f"matrix field shape {self.values.shape} does not match grid")
        return self

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues per node, shape (n, n, n, 3), ascending."""
        return np.linalg.eigvalsh(np.moveaxis(self.values, (0, 1), (-2, -1)))

    def spectral_sup(self) -> float:
        return float(np.max(np.abs(self.eigenvalues())))


class SeparableField(BaseModel):
    """Finite sum h(y, w) = sum_k a_k(y) b_k(w) on a y-grid times a w-grid."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    y_grid: GridSpec
    w_grid: GridSpec
    y_factors: np.ndarray
    w_factors: np.ndarray

    @model_validator(mode="after")
    def _check_shapes(self) -> "SeparableField":
        if self.y_factors.ndim != 4 or self.y_factors.shape[1:] != self.y_grid.shape:
            raise GridError("y_factors must have shape (rank,) + y_grid.shape")
        if self.w_factors.ndim != 4 or self.w_factors.shape[1:] != self.w_grid.shape:
            raise GridError("w_factors must have shape (rank,) + w_grid.shape")
        if self.y_factors.shape[0] != self.w_factors.shape[0]:
            raise GridError("y and w factor counts differ")
        return self

    @property
    def rank(self) -> int:
        return self.y_factors.shape[0]

    def at_y(self, index: Tuple[int, int, int]) -> np.ndarray:
        coeffs = self.y_factors[(slice(None),) + tuple(index)]
        return np.tensordot(coeffs, self.w_factors, axes=(0, 0))

    def is_zero(self) -> bool:
        return not (np.any(self.y_factors) and np.any(self.w_factors))


class Shell(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    k: int
    inner: float
    outer: float
    mask: np.ndarray
    count: int
    empty: bool


def sample(grid: GridSpec, fn: Callable[..., np.ndarray]) -> ScalarField:
    X, Y, Z = grid.mesh()
    return ScalarField(grid=grid, values=np.asarray(fn(X, Y, Z), dtype=float))


def evaluate_weight(grid: GridSpec, weight: Optional[WeightPolynomial]) -> np.ndarray:
    if weight is None:
        return np.ones(grid.shape)
    X, Y, Z = grid.mesh()
    out = np.zeros(grid.shape)
    for (i, j, k), coef in weight.items():
        if min(i, j, k) < 0 or i + j + k > MAX_WEIGHT_DEGREE:
            raise UnsupportedWeightError(f"weight monomial degree {i + j + k} exceeds {MAX_WEIGHT_DEGREE}")
        out += coef * X ** i * Y ** j * Z ** k
    return out


def integrate(field: ScalarField, weight: Optional[WeightPolynomial] = None) -> float:
    """
    Grid quadrature of field times a polynomial weight

    Args:
        field: Nodal values on a uniform grid
        weight: Polynomial {(i, j, k): coef} of total degree <= 4, None for 1

    Returns:
        h^3 * sum(weight * values)
    """
    w = evaluate_weight(field.grid, weight)
    return float(np.sum(w * field.values) * field.grid.cell_volume)


def smoothstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)


def cutoff_profile(r: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Radial profile chi(r) equal to 1 on [0,1], 0 beyond 2, with chi' and chi''."""
    r = np.asarray(r, dtype=float)
    u = np.clip(r - 1.0, 0.0, 1.0)
    inside = (r > 1.0) & (r < 2.0)
    chi = 1.0 - smoothstep(u)
    d1 = np.where(inside, -30.0 * u * u * (1.0 - u) ** 2, 0.0)
    d2 = np.where(inside, -60.0 * u * (1.0 - u) * (1.0 - 2.0 * u), 0.0)
    return chi, d1, d2


class CutoffFamily(BaseModel):
    """chi_R(x) = chi(|x - center| / R), with analytic gradient and Hessian."""

    model_config = ConfigDict(frozen=True)

    radius: float = Field(..., gt=0)
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def values(self, grid: GridSpec) -> np.ndarray:
        r = grid.radius(self.center) / self.radius
        return cutoff_profile(r)[0]

    def gradient(self, grid: GridSpec) -> np.ndarray:
        X, Y, Z = grid.mesh()
        d = np.stack([X - self.center[0], Y - self.center[1], Z - self.center[2]])
        r = np.sqrt(np.sum(d * d, axis=0))
        _, d1, _ = cutoff_profile(r / self.radius)
        with np.errstate(invalid="ignore", divide="ignore"):
            radial = np.where(r > 0, d1 / (self.radius * r), 0.0)
        return radial * d

    def hessian(self, grid: GridSpec) -> np.ndarray:
        X, Y, Z = grid.mesh()
        d = np.stack([X - self.center[0], Y - self.center[1], Z - self.center[2]])
        r = np.sqrt(np.sum(d * d, axis=0))
        _, d1, d2 = cutoff_profile(r / self.radius)
        R = self.radius
        with np.errstate(invalid="ignore", divide="ignore"):
            a = np.where(r > 0, d1 / (R * r), 0.0)
            b = np.where(r > 0, (d2 / (R * R) - d1 / (R * r)) / (r * r), 0.0)
        hess = b * d[:, None] * d[None, :]
        for i in range(3):
            hess[i, i] += a
        return hess


def make_cutoff(grid: GridSpec, radius: float, center: Optional[Sequence[float]] = None) -> ScalarField:
    if radius <= 0:
        raise ParameterError(f"cutoff radius must be positive, got {radius}")
    family = CutoffFamily(radius=radius, center=tuple(center) if center is not None else (0.0, 0.0, 0.0))
    return ScalarField(grid=grid, values=family.values(grid))


def measure_cutoff_constants(grid: GridSpec, radius: float) -> Tuple[float, float]:
    """Measured sup|grad chi_R| * R and sup|D^2 chi_R| * R^2 from grid differences."""
    chi = make_cutoff(grid, radius).values
    h = grid.spacing
    grad = gradient(chi, h)
    grad_sup = float(np.max(np.sqrt(np.sum(grad * grad, axis=0))))
    hess = hessian(chi, h)
    spectral = np.linalg.eigvalsh(np.moveaxis(hess, (0, 1), (-2, -1)))
    hess_sup = float(np.max(np.abs(spectral)))
    return grad_sup * radius, hess_sup * radius * radius


def dyadic_annuli(r0: float, kmin: int, kmax: int, grid: GridSpec, center: Optional[Sequence[float]] = None) -> List[Shell]:
    """
    Partition nodes into shells {2^k r0 <= |x| < 2^(k+1) r0}

    Args:
        r0: Base radius
        kmin, kmax: Inclusive shell index range
        grid: Grid whose nodes are partitioned
        center: Optional shell center

    Returns:
        One Shell per k; shells without nodes are flagged empty
    """
    if r0 <= 0:
        raise ParameterError(f"base radius must be positive, got {r0}")
    if kmin > kmax:
        raise ParameterError(f"empty shell range k in [{kmin}, {kmax}]")
    r = grid.radius(center)
    shells = []
    for k in range(kmin, kmax + 1):
        inner, outer = r0 * 2.0 ** k, r0 * 2.0 ** (k + 1)
        mask = (r >= inner) & (r < outer)
        count = int(mask.sum())
        if count == 0:
            logger.warning(f"Shell k={k} [{inner:.4g}, {outer:.4g}) contains no grid nodes")
        shells.append(Shell(k=k, inner=inner, outer=outer, mask=mask, count=count, empty=count == 0))
    return shells


# Fourth-order central differences. Padding is zero by default; "linear" extends
# each line by odd reflection about the end node, suited to log-densities.

def _pad(values: np.ndarray, axis: int, mode: str) -> np.ndarray:
    width = [(0, 0)] * values.ndim
    width[axis] = (2, 2)
    if mode == "zero":
        return np.pad(values, width, mode="constant")
    if mode == "linear":
        return np.pad(values, width, mode="reflect", reflect_type="odd")
    raise ParameterError(f"unknown padding mode {mode!r}")


def _shift(padded: np.ndarray, axis: int, offset: int, n: int) -> np.ndarray:
    index = [slice(None)] * padded.ndim
    index[axis] = slice(2 + offset, 2 + offset + n)
    return padded[tuple(index)]


def diff1(values: np.ndarray, axis: int, h: float, pad: str = "zero") -> np.ndarray:
    n = values.shape[axis]
    p = _pad(values, axis, pad)
    s = lambda k: _shift(p, axis, k, n)
    return (-s(2) + 8.0 * s(1) - 8.0 * s(-1) + s(-2)) / (12.0 * h)


def diff2(values: np.ndarray, axis: int, h: float, pad: str = "zero") -> np.ndarray:
    n = values.shape[axis]
    p = _pad(values, axis, pad)
    s = lambda k: _shift(p, axis, k, n)
    return (-s(2) + 16.0 * s(1) - 30.0 * s(0) + 16.0 * s(-1) - s(-2)) / (12.0 * h * h)


def gradient(values: np.ndarray, h: float, pad: str = "zero", offset: int = 0) -> np.ndarray:
    """Gradient over the last three axes; offset shifts the spatial axes right."""
    return np.stack([diff1(values, offset + k, h, pad) for k in range(3)])


def hessian(values: np.ndarray, h: float, pad: str = "zero") -> np.ndarray:
    out = np.empty((3, 3) + values.shape)
    for i in range(3):
        out[i, i] = diff2(values, i, h, pad)
        for j in range(i + 1, 3):
            out[i, j] = out[j, i] = diff1(diff1(values, i, h, pad), j, h, pad)
    return out


def laplacian(values: np.ndarray, h: float, pad: str = "zero") -> np.ndarray:
    return sum(diff2(values, k, h, pad) for k in range(3))


def divergence(vector: np.ndarray, h: float, pad: str = "zero") -> np.ndarray:
    return sum(diff1(vector[k], k, h, pad) for k in range(3))


def interpolate(
    grid: GridSpec, values: np.ndarray, points: np.ndarray, order: int = 3, mode: str = "constant"
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Spline interpolation of nodal values at arbitrary points

    Args:
        grid: Source grid
        values: Array with the grid's shape
        points: (..., 3) coordinates
        order: Spline order passed to map_coordinates
        mode: "constant" for zero outside the grid, "nearest" to extend the edge values

    Returns:
        Interpolated values and a mask of outside points
    """
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 3)
    coords = (flat.T + grid.extent) / grid.spacing
    outside = np.any((coords < 0) | (coords > grid.n - 1), axis=0)
    if mode not in ("constant", "nearest"):
        raise ParameterError(f"unknown interpolation mode {mode!r}")
    out = map_coordinates(values, coords, order=order, mode=mode, cval=0.0)
    if mode == "constant":
        out[outside] = 0.0
    return out.reshape(pts.shape[:-1]), outside.reshape(pts.shape[:-1])


def save_snapshot(field: ScalarField, path: Union[str, Path]) -> Path:
    """Write little-endian f64 values with x fastest plus a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.asarray(field.values, dtype="<f8").ravel(order="F")
    data.tofile(path)
    sidecar = {"n": field.grid.n, "extent": field.grid.extent, "order": "row-major", "dtype": "f64"}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))
    logger.info(f"Wrote snapshot {path} (n={field.grid.n}, L={field.grid.extent})")
    return path


def load_snapshot(path: Union[str, Path]) -> ScalarField:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    if meta.get("dtype") != "f64":
        raise GridError(f"unsupported snapshot dtype {meta.get('dtype')!r}")
    grid = GridSpec(n=int(meta["n"]), extent=float(meta["extent"]))
    data = np.fromfile(path, dtype="<f8")
    if data.size != grid.n ** 3:
        raise GridError(f"snapshot {path} holds {data.size} values, expected {grid.n ** 3}")
    return ScalarField(grid=grid, values=data.reshape(grid.shape, order="F").astype(float))
