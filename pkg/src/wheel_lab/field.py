"""Discrete Gaussian free field sampling and the derived area measure.

Grid convention: a field of side ``n`` has ``n * n`` square cells of mesh
``spacing = 1 / n`` tiling the unit square.  Zero-boundary fields live on the
``(n + 1) x (n + 1)`` cell corners with the outer ring pinned to 0.  Torus
fields live on ``n x n`` periodic vertices; :attr:`GridField.vertex_values`
extends them periodically to the same ``(n + 1) x (n + 1)`` corner layout so
downstream modules see one geometry.

Covariance normalisation: both modes use ``2*pi * L^+`` where ``L = 4I - A`` is
the lattice graph Laplacian (Dirichlet or periodic).  With this scaling the
pointwise variance grows like ``log(1/spacing)``, matching the usual
``-log|x - y|`` continuum convention, so ``gamma`` keeps its standard meaning.

RNG: Philox4x64-10 (``numpy.random.Philox``) keyed by a ``numpy``
``SeedSequence`` over ``[seed mod 2**64, mode code, n]`` (plus the sample index
for ensemble runs); standard normals come from ``Generator.standard_normal``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import fft as sfft

from .errors import ConfigurationError, InvalidSizeError, OracleInfeasibleError, ParameterError

__all__ = [
    "FieldMode",
    "GridField",
    "AreaMeasure",
    "CovarianceReport",
    "sample_field",
    "area_measure",
    "area_measure_from_heights",
    "covariance_report",
    "green_matrix",
    "field_rng",
]

TWO_PI = 2.0 * math.pi
MAX_ORACLE_N = 32
_U64 = (1 << 64) - 1


class FieldMode(str, Enum):
    ZERO_BOUNDARY = "zero-boundary"
    TORUS = "torus"
    # user-supplied corner values (oracle corpora, hand-built fixtures)
    EXPLICIT = "explicit"


_MODE_CODE = {FieldMode.ZERO_BOUNDARY: 0, FieldMode.TORUS: 1, FieldMode.EXPLICIT: 2}


def _parse_mode(mode) -> FieldMode:
    try:
        return FieldMode(mode)
    except ValueError:
        raise ConfigurationError(f"unknown field mode {mode!r}") from None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridField:
    """A sampled field.  ``values`` is ``(n+1)^2`` except in torus mode (``n^2``)."""

    n: int
    spacing: float
    seed: int
    mode: FieldMode
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("field values must be finite")

    @property
    def side(self) -> int:
        """Vertices per side of the planar corner grid."""
        return self.n + 1

    @property
    def vertex_values(self) -> np.ndarray:
        if self.mode is FieldMode.TORUS:
            return np.pad(self.values, ((0, 1), (0, 1)), mode="wrap")
        return self.values

    @property
    def cell_heights(self) -> np.ndarray:
        v = self.vertex_values
        return (v[:-1, :-1] + v[:-1, 1:] + v[1:, :-1] + v[1:, 1:]) / 4.0

    @classmethod
    def from_vertex_values(cls, values, seed: int = 0) -> "GridField":
        """Wrap an explicit ``(n+1) x (n+1)`` corner array (``n >= 1``)."""
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] < 2:
            raise InvalidSizeError(f"need a square array with side >= 2, got {values.shape}")
        n = values.shape[0] - 1
        return cls(n=n, spacing=1.0 / n, seed=seed, mode=FieldMode.EXPLICIT, values=values)

    @classmethod
    def zeros(cls, n: int) -> "GridField":
        return cls.from_vertex_values(np.zeros((n + 1, n + 1)))


@dataclass(frozen=True)
class AreaMeasure:
    """Normalised cell masses of ``exp(gamma * h)``; ``cell_mass[r, c]`` is cell row r, column c."""

    gamma: float
    cell_mass: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "cell_mass", _frozen(self.cell_mass))

    @property
    def n(self) -> int:
        return self.cell_mass.shape[0]

    @property
    def max_mass(self) -> float:
        return float(self.cell_mass.max())


def field_rng(seed: int, mode: FieldMode, n: int, *extra: int) -> np.random.Generator:
    key = [int(seed) & _U64, _MODE_CODE[mode], int(n), *(int(e) for e in extra)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def _dirichlet_eigs(n: int) -> np.ndarray:
    c = 2.0 * np.cos(np.pi * np.arange(1, n) / n)
    return 4.0 - c[:, None] - c[None, :]


def _torus_eigs(n: int) -> np.ndarray:
    c = 2.0 * np.cos(2.0 * np.pi * np.arange(n) / n)
    lam = 4.0 - c[:, None] - c[None, :]
    lam[0, 0] = np.inf  # drop the constant mode
    return lam


def _mean_zero_exact(h: np.ndarray) -> np.ndarray:
    """Snap each sample (last two axes) to a power-of-two grid whose integer sum is 0.

    Every partial sum of the snapped values is then an exact float, so any
    summation order returns exactly 0.
    """
    out = np.empty_like(h)
    for idx in np.ndindex(h.shape[:-2]):
        x = h[idx]
        total = float(np.abs(x).sum())
        if total == 0.0:
            out[idx] = 0.0
            continue
        q = 2.0 ** (math.ceil(math.log2(total)) + 1 - 52)
        k = np.rint(x / q).astype(np.int64)
        k.flat[0] -= int(k.sum())
        out[idx] = k * q
    return out


def _synthesize(noise: np.ndarray, mode: FieldMode, n: int) -> np.ndarray:
    """Map white noise (batch of interior or periodic arrays) to field samples."""
    if mode is FieldMode.ZERO_BOUNDARY:
        coeff = noise * np.sqrt(TWO_PI / _dirichlet_eigs(n))
        interior = sfft.dstn(coeff, type=1, norm="ortho", axes=(-2, -1))
        out = np.zeros(noise.shape[:-2] + (n + 1, n + 1))
        out[..., 1:-1, 1:-1] = interior
        return out
    mult = np.sqrt(TWO_PI / _torus_eigs(n))
    h = np.fft.ifft2(np.fft.fft2(noise, axes=(-2, -1)) * mult, axes=(-2, -1)).real
    return _mean_zero_exact(h)


def _noise_shape(mode: FieldMode, n: int) -> tuple[int, int]:
    return (n - 1, n - 1) if mode is FieldMode.ZERO_BOUNDARY else (n, n)


def _check_n(n) -> int:
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidSizeError(f"grid size n must be an integer >= 2, got {n!r}")
    return int(n)


def sample_field(n: int, seed: int, mode: FieldMode | str = FieldMode.ZERO_BOUNDARY) -> GridField:
    n = _check_n(n)
    mode = _parse_mode(mode)
    if mode is FieldMode.EXPLICIT:
        raise ConfigurationError("explicit fields are built with GridField.from_vertex_values")
    noise = field_rng(seed, mode, n).standard_normal(_noise_shape(mode, n))
    values = _synthesize(noise, mode, n)
    return GridField(n=n, spacing=1.0 / n, seed=int(seed), mode=mode, values=values)


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 < gamma < 2.0:
        raise ParameterError(f"gamma must lie in (0, 2), got {gamma}")
    return gamma


def area_measure_from_heights(heights, gamma: float, spacing: float | None = None) -> AreaMeasure:
    gamma = _check_gamma(gamma)
    h = np.asarray(heights, dtype=np.float64)
    if spacing is None:
        spacing = 1.0 / h.shape[0]
    w = np.exp(gamma * (h - h.max())) * spacing**2
    return AreaMeasure(gamma=gamma, cell_mass=w / w.sum())


def area_measure(field: GridField, gamma: float) -> AreaMeasure:
    return area_measure_from_heights(field.cell_heights, gamma, field.spacing)


def green_matrix(mode: FieldMode | str, n: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Dense covariance oracle ``2*pi * L^+`` and the vertex index list it is expressed on."""
    mode = _parse_mode(mode)
    if mode is FieldMode.ZERO_BOUNDARY:
        verts = [(r, c) for r in range(1, n) for c in range(1, n)]
        periodic = False
    elif mode is FieldMode.TORUS:
        verts = [(r, c) for r in range(n) for c in range(n)]
        periodic = True
    else:
        raise ConfigurationError("no covariance oracle for explicit fields")
    index = {v: i for i, v in enumerate(verts)}
    lap = np.zeros((len(verts), len(verts)))
    for (r, c), i in index.items():
        lap[i, i] = 4.0
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            rr, cc = r + dr, c + dc
            if periodic:
                rr, cc = rr % n, cc % n
            j = index.get((rr, cc))
            if j is not None:
                lap[i, j] -= 1.0
    inv = np.linalg.pinv(lap) if periodic else np.linalg.inv(lap)
    return TWO_PI * inv, verts


def covariance_panel(mode: FieldMode, n: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Fixed panel of up to six vertex pairs (diagonal, axis, diagonal-step, anti-diagonal, far)."""
    a = 1 if mode is FieldMode.ZERO_BOUNDARY else 0
    hi = n - 1
    b = hi if mode is FieldMode.ZERO_BOUNDARY else n // 2
    cand = [
        ((a, a), (a, a)),
        ((a, a), (a, a + 1)),
        ((a, a), (a + 1, a + 1)),
        ((a, a + 1), (a + 1, a)),
        ((a, a), (b, b)),
        ((b, b), (b, b)),
    ]
    lo = a
    top = hi if mode is FieldMode.ZERO_BOUNDARY else n - 1
    panel = []
    for p, q in cand:
        if all(lo <= x <= top for x in (*p, *q)) and (p, q) not in panel:
            panel.append((p, q))
    return panel


@dataclass(frozen=True)
class CovarianceReport:
    mode: str
    n: int
    samples: int
    seed: int
    pairs: list
    empirical: list
    oracle: list
    stderr: list
    z_scores: list

    @property
    def max_abs_z(self) -> float:
        return max(abs(z) for z in self.z_scores)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n": self.n,
            "samples": self.samples,
            "seed": self.seed,
            "pairs": [[list(p), list(q)] for p, q in self.pairs],
            "empirical": self.empirical,
            "oracle": self.oracle,
            "stderr": self.stderr,
            "z_scores": self.z_scores,
            "max_abs_z": self.max_abs_z,
        }


def ensemble(mode: FieldMode | str, n: int, samples: int, seed: int) -> np.ndarray:
    """``samples`` independent fields; sample ``i`` draws from a stream keyed by ``i``."""
    mode = _parse_mode(mode)
    shape = _noise_shape(mode, n)
    noise = np.empty((samples,) + shape)
    for i in range(samples):
        noise[i] = field_rng(seed, mode, n, i).standard_normal(shape)
    return _synthesize(noise, mode, n)


def covariance_report(mode: FieldMode | str, n: int, samples: int, seed: int) -> CovarianceReport:
    mode = _parse_mode(mode)
    n = _check_n(n)
    if n > MAX_ORACLE_N:
        raise OracleInfeasibleError(f"dense covariance oracle limited to n <= {MAX_ORACLE_N}")
    if samples < 1000:
        raise ParameterError(f"need at least 1000 samples, got {samples}")
    green, verts = green_matrix(mode, n)
    index = {v: i for i, v in enumerate(verts)}
    fields = ensemble(mode, n, samples, seed)
    pairs = covariance_panel(mode, n)
    emp, orc, se, zs = [], [], [], []
    for p, q in pairs:
        prod = fields[:, p[0], p[1]] * fields[:, q[0], q[1]]
        mean = float(prod.mean())
        err = float(prod.std(ddof=1) / math.sqrt(samples))
        ref = float(green[index[p], index[q]])
        emp.append(mean)
        orc.append(ref)
        se.append(err)
        zs.append((mean - ref) / err)
    return CovarianceReport(mode.value, n, samples, int(seed), pairs, emp, orc, se, zs)
