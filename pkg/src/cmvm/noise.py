"""Discrete model of an orthogonal martingale-valued noise field.

The driving noise lives on a time grid [0, T] and a finite partition of the
mark space U = [0, 1). Each spatial cell carries two independent mean-zero
components:

* a Gaussian component whose increments over one step in cell j are
  N(0, dt * intensity_j * cov_j), and
* a compensated jump component: Poisson(rate_j * dt) many events per step,
  each with an independent mean-zero amplitude whose covariance is the cell's
  amplitude covariance. Amplitudes are mean zero, so the compensator drift
  vanishes identically; it is still carried on the sampled path to keep the
  bookkeeping explicit.

Cells are sampled from separate counter-based random streams, so increments
over disjoint cells are independent and a path's content does not depend on
how many other paths an ensemble draws.

All quadratic-variation bookkeeping is done against the normalized form of a
specification (covariance operators of unit operator norm, magnitudes folded
into intensities) produced by :func:`normalize_spec`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from .hilbert import LinearOp, _check_dim, op_norm, psd_sqrt

__all__ = [
    "TimeGrid",
    "SpatialPartition",
    "TwoPointAmplitude",
    "GaussianAmplitude",
    "CellNoise",
    "NoiseSpec",
    "JumpEvent",
    "SamplePath",
    "QVMeasure",
    "QV_FLAVORS",
    "normalize_spec",
    "substream",
    "sample_path",
    "evaluate",
    "qv_measure",
    "covariance_field",
    "intensity_nu",
    "spec_to_json",
    "spec_from_json",
    "load_noise_spec",
]

QV_FLAVORS = ("total", "continuous", "discontinuous")

# Operators whose norm is within this tolerance of 1 are treated as already
# normalized, which makes normalize_spec an exact fixed point on its range.
_NORM_ATOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_n = horizon with step horizon/n."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if not (self.horizon > 0.0 and np.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @cached_property
    def times(self) -> np.ndarray:
        t = np.linspace(0.0, self.horizon, self.n_steps + 1)
        t.setflags(write=False)
        return t

    def index_of(self, t: float) -> int:
        """Grid index of t; raises if t is not a grid time."""
        k = int(round(t / self.dt))
        if k < 0 or k > self.n_steps or abs(t - k * self.dt) > 1e-9 * max(1.0, self.horizon):
            raise ValueError(f"t={t!r} is not a point of the {self.n_steps}-step grid")
        return k


@dataclass(frozen=True)
class SpatialPartition:
    """Disjoint half-open subintervals covering the mark space [0, 1)."""

    breaks: tuple

    def __init__(self, breaks: Sequence[float]):
        b = tuple(float(x) for x in breaks)
        if len(b) < 2:
            raise ValueError("partition needs at least one cell")
        if abs(b[0]) > 1e-12 or abs(b[-1] - 1.0) > 1e-12:
            raise ValueError(f"cells must cover [0, 1): breaks span [{b[0]}, {b[-1]}]")
        if any(hi <= lo for lo, hi in zip(b, b[1:])):
            raise ValueError("breaks must be strictly increasing")
        object.__setattr__(self, "breaks", b)

    @classmethod
    def uniform(cls, n_cells: int) -> "SpatialPartition":
        if n_cells < 1:
            raise ValueError(f"n_cells must be >= 1, got {n_cells}")
        return cls(np.linspace(0.0, 1.0, n_cells + 1))

    @property
    def n_cells(self) -> int:
        return len(self.breaks) - 1

    @property
    def cells(self) -> tuple:
        return tuple(zip(self.breaks[:-1], self.breaks[1:]))

    @property
    def weights(self) -> np.ndarray:
        """Reference measure (length) of each cell."""
        return np.diff(np.asarray(self.breaks))

    def validate_cells(self, cells: Sequence[int]) -> tuple:
        idx = tuple(int(j) for j in cells)
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate cell indices in {cells}")
        for j in idx:
            if j < 0 or j >= self.n_cells:
                raise ValueError(f"cell index {j} outside 0..{self.n_cells - 1}")
        return idx


class TwoPointAmplitude:
    """Symmetric two-point jump amplitude: +/- vector with probability 1/2.

    Stored as a unit direction and a scalar scale, so the amplitude
    covariance splits as scale^2 * (unit rank-one operator).
    """

    kind = "two_point"

    def __init__(self, vector: Sequence[float]):
        v = np.asarray(vector, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError("two-point amplitude needs a vector")
        r = float(np.linalg.norm(v))
        if not (r > 0.0 and np.isfinite(r)):
            raise ValueError("two-point amplitude vector must be nonzero and finite")
        self.direction = v / r
        self.direction.setflags(write=False)
        self.scale = r

    @property
    def dim(self) -> int:
        return self.direction.shape[0]

    @cached_property
    def normalized_cov(self) -> np.ndarray:
        c = np.outer(self.direction, self.direction)
        c.setflags(write=False)
        return c

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        signs = rng.integers(0, 2, size=n) * 2.0 - 1.0
        return (self.scale * signs)[:, None] * self.direction[None, :]

    def params(self) -> dict:
        return {"kind": self.kind, "vector": (self.scale * self.direction).tolist()}


class GaussianAmplitude:
    """Centered Gaussian jump amplitude with the given covariance."""

    kind = "gaussian"

    def __init__(self, cov: Sequence[Sequence[float]]):
        c = np.asarray(cov, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"covariance must be square, got shape {c.shape}")
        s = op_norm(c)
        if s <= 0.0:
            raise ValueError("gaussian amplitude covariance must be nonzero")
        self.normalized_cov = c / s if abs(s - 1.0) > _NORM_ATOL else np.array(c)
        self.normalized_cov.setflags(write=False)
        self.scale = float(np.sqrt(s))
        self._factor = psd_sqrt(self.normalized_cov).entries

    @property
    def dim(self) -> int:
        return self.normalized_cov.shape[0]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal((n, self.dim))
        return self.scale * (z @ self._factor.T)

    def params(self) -> dict:
        return {"kind": self.kind, "cov": (self.scale**2 * self.normalized_cov).tolist()}


AmplitudeModel = Union[TwoPointAmplitude, GaussianAmplitude]

_AMPLITUDE_KINDS = {"two_point": TwoPointAmplitude, "gaussian": GaussianAmplitude}


def amplitude_from_params(params: dict) -> AmplitudeModel:
    kind = params.get("kind")
    if kind == "two_point":
        return TwoPointAmplitude(params["vector"])
    if kind == "gaussian":
        return GaussianAmplitude(params["cov"])
    raise ValueError(f"unknown amplitude kind {kind!r}; expected one of {sorted(_AMPLITUDE_KINDS)}")


@dataclass(frozen=True, eq=False)
class CellNoise:
    """Noise content of one spatial cell.

    diffusion_cov is the Gaussian covariance shape (None for no diffusion),
    diffusion_intensity its rate per unit time. jump_rate is the Poisson
    event rate per unit time; jump_amplitude the amplitude model.
    """

    diffusion_cov: Optional[np.ndarray] = None
    diffusion_intensity: float = 0.0
    jump_rate: float = 0.0
    jump_amplitude: Optional[AmplitudeModel] = None

    def __post_init__(self):
        if self.diffusion_cov is not None:
            c = np.asarray(self.diffusion_cov, dtype=np.float64)
            if c.ndim != 2 or c.shape[0] != c.shape[1]:
                raise ValueError(f"diffusion covariance must be square, got {c.shape}")
            c = np.array(c)
            c.setflags(write=False)
            object.__setattr__(self, "diffusion_cov", c)
        if self.diffusion_intensity < 0.0 or self.jump_rate < 0.0:
            raise ValueError("intensities must be nonnegative")
        if self.jump_rate > 0.0 and self.jump_amplitude is None:
            raise ValueError("jump_rate > 0 needs an amplitude model")

    @property
    def has_diffusion(self) -> bool:
        return (
            self.diffusion_cov is not None
            and self.diffusion_intensity > 0.0
            and op_norm(self.diffusion_cov) > 0.0
        )

    @property
    def has_jumps(self) -> bool:
        return self.jump_rate > 0.0 and self.jump_amplitude is not None


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Full noise model: mark-space partition plus per-cell content."""

    dim: int
    partition: SpatialPartition
    cells: tuple

    def __init__(self, dim: int, partition: SpatialPartition, cells: Sequence[CellNoise]):
        _check_dim(dim, "noise")
        cells = tuple(cells)
        if len(cells) != partition.n_cells:
            raise ValueError(
                f"{len(cells)} cell specs for a partition with {partition.n_cells} cells"
            )
        for j, cell in enumerate(cells):
            if cell.diffusion_cov is not None and cell.diffusion_cov.shape != (dim, dim):
                raise ValueError(f"cell {j}: diffusion covariance is not {dim}x{dim}")
            if cell.jump_amplitude is not None and cell.jump_amplitude.dim != dim:
                raise ValueError(f"cell {j}: amplitude dim {cell.jump_amplitude.dim} != {dim}")
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "partition", partition)
        object.__setattr__(self, "cells", cells)

    @property
    def n_cells(self) -> int:
        return self.partition.n_cells

    @cached_property
    def is_normalized(self) -> bool:
        """True when every cell is in canonical form: covariance operators of
        unit norm and no dead fields (a shape with zero intensity, an
        amplitude with zero rate)."""
        for cell in self.cells:
            if cell.has_diffusion:
                if abs(op_norm(cell.diffusion_cov) - 1.0) > _NORM_ATOL:
                    return False
            elif cell.diffusion_cov is not None or cell.diffusion_intensity != 0.0:
                return False
            if not cell.has_jumps and (cell.jump_rate != 0.0 or cell.jump_amplitude is not None):
                return False
        return True

    @cached_property
    def tables(self) -> "_NoiseTables":
        if not self.is_normalized:
            raise ValueError("derived tables require a normalized spec; call normalize_spec")
        return _NoiseTables(self)


class _NoiseTables:
    """Per-cell derived quantities of a normalized spec (rates, covariance
    fields and their square roots), computed once and shared."""

    def __init__(self, spec: NoiseSpec):
        m = spec.n_cells
        self.cont_rate = np.zeros(m)
        self.jump_qv_rate = np.zeros(m)
        self.jump_rate = np.zeros(m)
        self.q_cont = [None] * m
        self.q_cont_sqrt = [None] * m
        self.q_jump = [None] * m
        self.q_jump_sqrt = [None] * m
        self.gauss_factor = [None] * m
        for j, cell in enumerate(spec.cells):
            if cell.has_diffusion:
                self.cont_rate[j] = cell.diffusion_intensity
                self.q_cont[j] = np.asarray(cell.diffusion_cov)
                root = psd_sqrt(cell.diffusion_cov).entries
                self.q_cont_sqrt[j] = root
                self.gauss_factor[j] = np.sqrt(cell.diffusion_intensity) * root
            if cell.has_jumps:
                amp = cell.jump_amplitude
                self.jump_rate[j] = cell.jump_rate
                self.jump_qv_rate[j] = cell.jump_rate * amp.scale**2
                self.q_jump[j] = np.asarray(amp.normalized_cov)
                self.q_jump_sqrt[j] = psd_sqrt(amp.normalized_cov).entries
        self.total_rate = self.cont_rate + self.jump_qv_rate
        self.q_total = [None] * m
        self.q_total_sqrt = [None] * m
        for j in range(m):
            if self.total_rate[j] > 0.0:
                q = np.zeros((spec.dim, spec.dim))
                if self.cont_rate[j] > 0.0:
                    q += self.cont_rate[j] * self.q_cont[j]
                if self.jump_qv_rate[j] > 0.0:
                    q += self.jump_qv_rate[j] * self.q_jump[j]
                q /= self.total_rate[j]
                self.q_total[j] = q
                self.q_total_sqrt[j] = psd_sqrt(q).entries

    def rate(self, flavor: str) -> np.ndarray:
        if flavor == "total":
            return self.total_rate
        if flavor == "continuous":
            return self.cont_rate
        if flavor == "discontinuous":
            return self.jump_qv_rate
        raise ValueError(f"unknown flavor {flavor!r}; expected one of {QV_FLAVORS}")

    def field(self, flavor: str) -> list:
        if flavor == "total":
            return self.q_total
        if flavor == "continuous":
            return self.q_cont
        if flavor == "discontinuous":
            return self.q_jump
        raise ValueError(f"unknown flavor {flavor!r}; expected one of {QV_FLAVORS}")

    def field_sqrt(self, flavor: str) -> list:
        if flavor == "total":
            return self.q_total_sqrt
        if flavor == "continuous":
            return self.q_cont_sqrt
        if flavor == "discontinuous":
            return self.q_jump_sqrt
        raise ValueError(f"unknown flavor {flavor!r}; expected one of {QV_FLAVORS}")


def normalize_spec(spec: NoiseSpec) -> NoiseSpec:
    """Rescale every cell's operators to unit operator norm.

    The removed magnitude is folded into the cell's intensity, so increment
    distributions are unchanged. Jump amplitude models already store a
    norm-one covariance plus a scalar scale, hence only the diffusion part
    can need rescaling; the map is an exact fixed point on normalized specs.

    Raises:
        ValueError: if no cell carries any noise at all.
    """
    if not any(cell.has_diffusion or cell.has_jumps for cell in spec.cells):
        raise ValueError("noise spec carries no mass: every cell is inert")
    if spec.is_normalized:
        return spec
    new_cells = []
    for cell in spec.cells:
        diffusion_cov = None
        intensity = 0.0
        if cell.has_diffusion:
            s = op_norm(cell.diffusion_cov)
            if abs(s - 1.0) <= _NORM_ATOL:
                diffusion_cov, intensity = cell.diffusion_cov, cell.diffusion_intensity
            else:
                diffusion_cov = cell.diffusion_cov / s
                intensity = cell.diffusion_intensity * s
        jump_rate, amplitude = 0.0, None
        if cell.has_jumps:
            jump_rate, amplitude = cell.jump_rate, cell.jump_amplitude
        new_cells.append(
            CellNoise(
                diffusion_cov=diffusion_cov,
                diffusion_intensity=intensity,
                jump_rate=jump_rate,
                jump_amplitude=amplitude,
            )
        )
    return NoiseSpec(spec.dim, spec.partition, new_cells)


def substream(master_seed: int, stream: int, slot: int = 0) -> np.random.Generator:
    """Independent generator for (master_seed, stream, slot).

    Philox is counter-based: distinct key/counter-block pairs yield
    independent streams no matter how many are instantiated, so path
    ``stream`` of an ensemble draws the same numbers whether the ensemble has
    one path or a million.
    """
    key = np.array([master_seed % 2**64, stream % 2**64], dtype=np.uint64)
    counter = np.array([0, 0, slot % 2**64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@dataclass(frozen=True, eq=False)
class JumpEvent:
    """One jump of the noise field: cell, exact time, amplitude vector."""

    step: int
    cell: int
    time: float
    amplitude: np.ndarray


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One realization of the noise field on a grid.

    gauss[k, j] is the Gaussian increment of cell j over step k; jumps are
    all jump events sorted by (step, time); jump_sums[k, j] their per-step
    per-cell totals. compensator_rate is the per-cell drift rate removed by
    compensation (identically zero for the mean-zero amplitude families, but
    carried so the martingale bookkeeping stays visible).
    """

    spec: NoiseSpec
    grid: TimeGrid
    seed: int
    path_index: int
    gauss: np.ndarray
    jumps: tuple
    jump_sums: np.ndarray
    compensator_rate: np.ndarray

    @cached_property
    def jumps_by_step(self) -> tuple:
        buckets = [[] for _ in range(self.grid.n_steps)]
        for ev in self.jumps:
            buckets[ev.step].append(ev)
        return tuple(tuple(b) for b in buckets)


# Purpose slots inside one (seed, path, cell) stream family.
_SLOT_GAUSS, _SLOT_COUNTS, _SLOT_TIMES, _SLOT_AMPS = range(4)


def sample_path(spec: NoiseSpec, grid: TimeGrid, seed: int, path_index: int = 0) -> SamplePath:
    """Draw one path of the noise field, deterministically in (seed, path_index)."""
    spec = normalize_spec(spec)
    tab = spec.tables
    n, m, d = grid.n_steps, spec.n_cells, spec.dim
    dt = grid.dt
    sqrt_dt = np.sqrt(dt)
    gauss = np.zeros((n, m, d))
    jump_sums = np.zeros((n, m, d))
    events = []
    for j, cell in enumerate(spec.cells):
        if cell.has_diffusion:
            rg = substream(seed, path_index, 4 * j + _SLOT_GAUSS)
            z = rg.standard_normal((n, d))
            gauss[:, j, :] = sqrt_dt * (z @ tab.gauss_factor[j].T)
        if cell.has_jumps:
            rg_counts = substream(seed, path_index, 4 * j + _SLOT_COUNTS)
            counts = rg_counts.poisson(cell.jump_rate * dt, size=n)
            total = int(counts.sum())
            if total > 0:
                rg_times = substream(seed, path_index, 4 * j + _SLOT_TIMES)
                rg_amps = substream(seed, path_index, 4 * j + _SLOT_AMPS)
                offsets = rg_times.random(total)
                amps = cell.jump_amplitude.sample(rg_amps, total)
                pos = 0
                for k in np.nonzero(counts)[0]:
                    c = int(counts[k])
                    # times in (t_k, t_{k+1}]: 1 - U with U uniform on [0, 1)
                    times = grid.times[k] + dt * (1.0 - offsets[pos : pos + c])
                    order = np.argsort(times)
                    for i in order:
                        amp = amps[pos + i]
                        events.append(JumpEvent(int(k), j, float(times[i]), amp))
                        jump_sums[k, j, :] += amp
                    pos += c
    events.sort(key=lambda ev: (ev.step, ev.time))
    gauss.setflags(write=False)
    jump_sums.setflags(write=False)
    comp = np.zeros((m, d))
    comp.setflags(write=False)
    return SamplePath(
        spec=spec,
        grid=grid,
        seed=int(seed),
        path_index=int(path_index),
        gauss=gauss,
        jumps=tuple(events),
        jump_sums=jump_sums,
        compensator_rate=comp,
    )


def evaluate(path: SamplePath, s: float, t: float, cells: Sequence[int], h: Sequence[float]) -> float:
    """Pairing <M((s, t], A), h> of the field with a direction h.

    A is the union of the given partition cells; s and t must be grid times
    with s <= t. The value is additive in the cell set and linear in h.
    """
    k0 = path.grid.index_of(s)
    k1 = path.grid.index_of(t)
    if k0 > k1:
        raise ValueError(f"window is reversed: s={s} > t={t}")
    idx = path.spec.partition.validate_cells(cells)
    hv = np.asarray(h, dtype=np.float64)
    if hv.shape != (path.spec.dim,):
        raise ValueError(f"direction must have dim {path.spec.dim}, got shape {hv.shape}")
    if k0 == k1 or not idx:
        return 0.0
    block = path.gauss[k0:k1, idx, :] + path.jump_sums[k0:k1, idx, :]
    value = float(block.sum(axis=(0, 1)) @ hv)
    # compensator contribution (zero for mean-zero amplitudes, kept explicit)
    value -= (t - s) * float(path.compensator_rate[idx, :].sum(axis=0) @ hv)
    return value


@dataclass(frozen=True, eq=False)
class QVMeasure:
    """Quadratic-variation mass on the step x cell product, one flavor.

    mass[k, j] is the measure of (t_k, t_{k+1}] x A_j. The total flavor is
    the entrywise sum of the continuous and discontinuous flavors.
    """

    grid: TimeGrid
    flavor: str
    mass: np.ndarray

    def window_mass(self, k0: int, k1: int, cells: Optional[Sequence[int]] = None) -> float:
        sub = self.mass[k0:k1] if cells is None else self.mass[k0:k1][:, list(cells)]
        return float(sub.sum())

    def total(self) -> float:
        return float(self.mass.sum())

    def cumulative(self) -> np.ndarray:
        """Mass of [0, t_k] x U for k = 0..n_steps."""
        out = np.zeros(self.grid.n_steps + 1)
        np.cumsum(self.mass.sum(axis=1), out=out[1:])
        return out


def qv_measure(spec: NoiseSpec, grid: TimeGrid, flavor: str = "total") -> QVMeasure:
    """Quadratic-variation measure of the field on the grid.

    In this time-homogeneous model the mass of one step-cell block is
    dt * (flavor rate of the cell); the continuous rate is the normalized
    diffusion intensity and the discontinuous rate is jump_rate * scale^2.
    """
    spec = normalize_spec(spec)
    rate = spec.tables.rate(flavor)
    mass = np.tile(rate * grid.dt, (grid.n_steps, 1))
    mass.setflags(write=False)
    return QVMeasure(grid=grid, flavor=flavor, mass=mass)


def covariance_field(spec: NoiseSpec, cell: int, flavor: str = "total") -> LinearOp:
    """Pointwise covariance operator of the field on one cell.

    The model is time homogeneous, so the field depends on the cell only.
    Flavors: "continuous" returns the normalized diffusion covariance,
    "discontinuous" the normalized amplitude covariance, and "total" their
    combination weighted by the flavors' share of the total mass (the
    Radon-Nikodym weights mass_c/mass_total and mass_d/mass_total).

    Raises:
        ValueError: if the cell carries no mass of the requested flavor
            (the covariance field Q_M is undefined off the support).
    """
    spec = normalize_spec(spec)
    tab = spec.tables
    (cell,) = spec.partition.validate_cells([cell])
    q = tab.field(flavor)[cell]
    if q is None:
        raise ValueError(
            f"Q_M undefined off support: cell {cell} carries no {flavor} mass"
        )
    return LinearOp(q)


def intensity_nu(
    spec: NoiseSpec, grid: TimeGrid, h: Sequence[float], flavor: str = "total"
) -> np.ndarray:
    """Directional intensity nu_h[k, j] = <Q_M h, h> * mass[k, j].

    Cells without mass of the requested flavor contribute zero (the zero
    measure), so the array is defined everywhere.
    """
    spec = normalize_spec(spec)
    tab = spec.tables
    hv = np.asarray(h, dtype=np.float64)
    if hv.shape != (spec.dim,):
        raise ValueError(f"direction must have dim {spec.dim}, got shape {hv.shape}")
    rate = tab.rate(flavor)
    field = tab.field(flavor)
    per_cell = np.zeros(spec.n_cells)
    for j in range(spec.n_cells):
        if rate[j] > 0.0:
            per_cell[j] = rate[j] * float(hv @ field[j] @ hv)
    return np.tile(per_cell * grid.dt, (grid.n_steps, 1))


# ---------------------------------------------------------------------------
# Serialization. The JSON layout is documented in docs/noise-spec.md.
# ---------------------------------------------------------------------------


def spec_to_json(spec: NoiseSpec) -> dict:
    cells = []
    for cell in spec.cells:
        doc = {}
        if cell.diffusion_cov is not None and cell.diffusion_intensity > 0.0:
            doc["diffusion"] = {
                "cov": cell.diffusion_cov.tolist(),
                "intensity": cell.diffusion_intensity,
            }
        else:
            doc["diffusion"] = None
        if cell.has_jumps:
            doc["jump"] = {
                "rate": cell.jump_rate,
                "amplitude": cell.jump_amplitude.params(),
            }
        else:
            doc["jump"] = None
        cells.append(doc)
    return {"dim": spec.dim, "partition": list(spec.partition.breaks), "cells": cells}


def spec_from_json(doc: dict) -> NoiseSpec:
    try:
        dim = int(doc["dim"])
        partition = SpatialPartition(doc["partition"])
        cell_docs = doc["cells"]
    except KeyError as exc:
        raise ValueError(f"noise spec document is missing field {exc}") from exc
    cells = []
    for j, cd in enumerate(cell_docs):
        try:
            diffusion = cd.get("diffusion")
            jump = cd.get("jump")
            kwargs = {}
            if diffusion is not None:
                kwargs["diffusion_cov"] = np.asarray(diffusion["cov"], dtype=np.float64)
                kwargs["diffusion_intensity"] = float(diffusion["intensity"])
            if jump is not None:
                kwargs["jump_rate"] = float(jump["rate"])
                kwargs["jump_amplitude"] = amplitude_from_params(jump["amplitude"])
            cells.append(CellNoise(**kwargs))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"cell {j}: {exc}") from exc
    return NoiseSpec(dim, partition, cells)


def load_noise_spec(path: str) -> NoiseSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_json(json.load(fh))
