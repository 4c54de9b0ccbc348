"""Glass-density estimation and the two-scale power-law probe.

A network with many ReLUs scatters gradient discontinuities through parameter
space: crossing a unit's activation threshold adds a pseudorandom kick to the
gradient. This module turns near-threshold unit records into a density matrix
R of gradient variation per unit parameter distance, bounds the expected loss
increase that the resulting "glass" structure permits, provides the
zero-bias minimum-variance kernels for estimating diagonal dependence from
matrix-vector samples, and measures empirical gradient variations at two
probe scales to fit a power-law exponent per parameter partition.

Conventions:
  * gradient variations v(lam) are elementwise second moments of
    g(mu + lam*delta) - g(mu) under Rademacher sign vectors delta;
  * the exponent p of a partition P is
    log2(sum_P v(2*lam)) - log2(sum_P v(lam)),
    2 for Hessian-dominated and 1 for glass-dominated landscapes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy.integrate import quad

from .netkit import ConfigError, ReluUnitRecord

DENSITIES = ("rademacher", "normal")
_DENSITY_ALIASES = {"standard-normal": "normal", "gaussian": "normal"}

# Integration window for the normal density; the integrand is bounded by the
# Gaussian tail, so [-8, 8] is exhaustive at double precision.
_QUAD_SPAN = 8.0
_QUAD_REL_TOL = 1e-8


def _canonical_density(density: str) -> str:
    density = _DENSITY_ALIASES.get(density, density)
    if density not in DENSITIES:
        raise ConfigError(f"unknown sample density {density!r}, expected one of {DENSITIES}")
    return density


# ---------------------------------------------------------------------------
# Density matrix from ReLU records


@dataclass(frozen=True)
class GlassDensityMatrix:
    """Nonnegative d x d matrix of gradient variation per unit distance."""

    R: np.ndarray
    psi: float


@dataclass(frozen=True)
class GlassDensityDiag:
    """Diagonal glass density rho, the workhorse approximation of R."""

    rho: np.ndarray


def density_matrix(
    records: Iterable[ReluUnitRecord], psi: float, dim: int | None = None
) -> GlassDensityMatrix:
    """Accumulate the glass density matrix from near-threshold unit records.

    R[i, j] = 1/(2 psi) * sum_k grad_y[k, i]^2 * dloss_dz[k]^2 * |grad_y[k, j]|.

    Records are summed in unit-id order, so the result is exactly invariant
    to input ordering. An empty record list yields the zero matrix (dim must
    then be supplied).
    """
    if not psi > 0:
        raise ConfigError("psi must be positive")
    records = sorted(records, key=lambda r: r.unit_id)
    if not records:
        if dim is None:
            raise ConfigError("dim is required to build a density matrix from no records")
        return GlassDensityMatrix(np.zeros((dim, dim)), float(psi))
    gy = np.stack([r.grad_y for r in records])
    coeff = np.array([r.dloss_dz for r in records]) ** 2
    r_mat = ((gy * gy) * coeff[:, None]).T @ np.abs(gy) / (2.0 * psi)
    return GlassDensityMatrix(r_mat, float(psi))


def density_diag(matrix: GlassDensityMatrix) -> GlassDensityDiag:
    """Diagonal of the density matrix."""
    return GlassDensityDiag(np.diag(matrix.R).copy())


def variation_bound(matrix: GlassDensityMatrix, delta: np.ndarray) -> np.ndarray:
    """Upper bound R |delta| on gradient variations for a step delta."""
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (matrix.R.shape[0],):
        raise ConfigError(
            f"delta has shape {delta.shape}, density matrix is {matrix.R.shape}"
        )
    return matrix.R @ np.abs(delta)


def loss_increase_bound_terms(rho: np.ndarray | GlassDensityDiag, delta: np.ndarray) -> np.ndarray:
    """Per-coordinate bound sqrt(2/(3 pi) * rho_i |delta_i|^3) on expected loss increase.

    The sum of these terms is the bound used by the per-coordinate step
    optimization; see loss_increase_bound for the aggregate scalar form.
    """
    rho = rho.rho if isinstance(rho, GlassDensityDiag) else np.asarray(rho, dtype=np.float64)
    if np.any(rho < 0):
        raise ConfigError("glass density must be elementwise nonnegative")
    delta = np.asarray(delta, dtype=np.float64)
    if rho.shape != delta.shape:
        raise ConfigError(f"shape mismatch: rho {rho.shape} vs delta {delta.shape}")
    return np.sqrt((2.0 / (3.0 * math.pi)) * rho * np.abs(delta) ** 3)


def loss_increase_bound(rho: np.ndarray | GlassDensityDiag, delta: np.ndarray) -> float:
    """Aggregate bound sqrt(2/(3 pi) * sum_i rho_i |delta_i|^3) on expected loss increase.

    This is the scalar form that enters the modified quasi-Newton objective;
    loss_increase_bound_terms gives the per-coordinate decomposition (whose
    sum is a valid, looser-structured alternative aggregate).
    """
    rho = rho.rho if isinstance(rho, GlassDensityDiag) else np.asarray(rho, dtype=np.float64)
    if np.any(rho < 0):
        raise ConfigError("glass density must be elementwise nonnegative")
    delta = np.asarray(delta, dtype=np.float64)
    if rho.shape != delta.shape:
        raise ConfigError(f"shape mismatch: rho {rho.shape} vs delta {delta.shape}")
    return float(np.sqrt((2.0 / (3.0 * math.pi)) * np.sum(rho * np.abs(delta) ** 3)))


# ---------------------------------------------------------------------------
# Optimal diagonal-estimation kernels


@dataclass(frozen=True)
class KernelSpec:
    """Zero-bias minimum-variance kernel for diagonal estimation.

    kappa(delta_i) = delta_i / (c * (delta_i^2 + omega2_i)), where omega2_i
    scales the off-diagonal row mass and c normalizes the estimator to zero
    bias under the sample density. restrict > 0 rejects updates whenever
    |delta_i| falls below that threshold (the density is renormalized
    accordingly, which is how c is computed here).
    """

    density: str
    omega2: float | np.ndarray
    restrict: float = 0.0
    c: float | np.ndarray = 1.0


def update_probability(density: str, restrict: float) -> float:
    """Probability that a sample coordinate survives the restriction."""
    density = _canonical_density(density)
    if restrict <= 0:
        return 1.0
    if density == "rademacher":
        return 1.0 if restrict <= 1.0 else 0.0
    return math.erfc(restrict / math.sqrt(2.0))


def kernel_constant(density: str, omega2, restrict: float = 0.0):
    """Normalization c = E[delta^2 / (delta^2 + omega2)] under the (restricted) density.

    Exact 1/(1 + omega2) for Rademacher; adaptive quadrature (relative
    tolerance 1e-8 on |x| <= 8) for the normal density. omega2 may be a
    scalar or a per-coordinate vector.
    """
    density = _canonical_density(density)
    if restrict < 0:
        raise ConfigError("restriction threshold must be >= 0")
    omega2_arr = np.asarray(omega2, dtype=np.float64)
    if np.any(omega2_arr < 0):
        raise ConfigError("omega2 must be nonnegative")

    def one(w2: float) -> float:
        if w2 == 0.0:
            return 1.0  # integrand is identically 1 on the support
        if density == "rademacher":
            if restrict > 1.0:
                raise ConfigError("restriction rejects every Rademacher sample")
            return 1.0 / (1.0 + w2)
        prob = update_probability("normal", restrict)
        if prob == 0.0:
            raise ConfigError("restriction rejects every sample")
        lo = max(restrict, 0.0)

        def integrand(x):
            return (x * x) / (x * x + w2) * math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)

        val, _ = quad(integrand, lo, _QUAD_SPAN, epsrel=_QUAD_REL_TOL, limit=200)
        return 2.0 * val / prob

    if omega2_arr.ndim == 0:
        return one(float(omega2_arr))
    return np.array([one(float(w2)) for w2 in omega2_arr])


def make_kernel(density: str, omega2, restrict: float = 0.0) -> KernelSpec:
    """Build a KernelSpec with its normalization constant precomputed."""
    density = _canonical_density(density)
    return KernelSpec(
        density=density,
        omega2=np.asarray(omega2, dtype=np.float64) if np.ndim(omega2) else float(omega2),
        restrict=float(restrict),
        c=kernel_constant(density, omega2, restrict),
    )


def optimal_kernel_weight(delta_i, kspec: KernelSpec):
    """Evaluate the kernel at sample coordinate value(s) delta_i.

    For the two-point Rademacher density the general expression collapses to
    the identity kappa(delta) = delta, which is evaluated directly so the
    collapse is exact. Restricted kernels return 0 below the threshold.
    """
    delta_i = np.asarray(delta_i, dtype=np.float64)
    if kspec.density == "rademacher":
        weight = delta_i.copy()
    else:
        weight = delta_i / ((delta_i * delta_i + kspec.omega2) * kspec.c)
    if kspec.restrict > 0:
        weight = np.where(np.abs(delta_i) >= kspec.restrict, weight, 0.0)
    if weight.ndim == 0:
        return float(weight)
    return weight


@dataclass(frozen=True)
class EstimatorVariance:
    """Closed-form variance of the optimal-kernel diagonal estimator.

    per_sample is the variance per accepted sample, m^2 (1/c - 1);
    per_draw divides by the update probability, the cost-honest figure for
    restricted kernels.
    """

    per_sample: float | np.ndarray
    per_draw: float | np.ndarray
    update_probability: float


def estimator_variance(kspec: KernelSpec, m_i) -> EstimatorVariance:
    """Single-sample variance of the optimal-kernel estimator at diagonal value m_i."""
    m_i = np.asarray(m_i, dtype=np.float64)
    per_sample = (m_i * m_i) * (1.0 / np.asarray(kspec.c) - 1.0)
    prob = update_probability(kspec.density, kspec.restrict)
    per_draw = per_sample / prob
    if per_sample.ndim == 0:
        return EstimatorVariance(float(per_sample), float(per_draw), prob)
    return EstimatorVariance(per_sample, per_draw, prob)


# ---------------------------------------------------------------------------
# Gradient-variation measurements and the power law


@dataclass(frozen=True)
class GradientVariationMeasurement:
    """Elementwise second moments of gradient changes at probe distance lam."""

    lam: float
    v: np.ndarray
    n_samples: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "v"])
            for i, value in enumerate(self.v):
                writer.writerow([i, repr(float(value))])


def measure_variations(
    grad_fn: Callable[[np.ndarray], np.ndarray],
    mu: np.ndarray,
    lam: float,
    n_samples: int,
    seed: int,
) -> GradientVariationMeasurement:
    """Average squared gradient change over Rademacher perturbations of scale lam.

    Samples are drawn and accumulated in a fixed order, so the result is
    deterministic given the seed; calling with the same seed at a different
    lam reuses the same sign vectors (shared-seed pairing across scales).
    """
    if not lam > 0:
        raise ConfigError("probe distance lam must be positive")
    if n_samples < 1:
        raise ConfigError("need at least one sample")
    mu = np.asarray(mu, dtype=np.float64)
    rng = np.random.default_rng(seed)
    g0 = np.asarray(grad_fn(mu), dtype=np.float64)
    acc = np.zeros_like(g0)
    for _ in range(n_samples):
        signs = rng.integers(0, 2, size=mu.shape[0]).astype(np.float64) * 2.0 - 1.0
        gamma = np.asarray(grad_fn(mu + lam * signs), dtype=np.float64) - g0
        acc += gamma * gamma
    return GradientVariationMeasurement(float(lam), acc / n_samples, int(n_samples))


@dataclass(frozen=True)
class PartitionPowerLaw:
    name: str
    sum_v_lambda: float
    sum_v_2lambda: float
    p: float
    defined: bool


@dataclass(frozen=True)
class PowerLawReport:
    """Per-partition power-law exponents of gradient variations."""

    lam: float
    entries: tuple[PartitionPowerLaw, ...]

    def exponent(self, name: str) -> float:
        for entry in self.entries:
            if entry.name == name:
                return entry.p
        raise KeyError(name)

    @property
    def undefined_partitions(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries if not e.defined)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["partition", "sum_v_lambda", "sum_v_2lambda", "p"])
            for e in self.entries:
                writer.writerow(
                    [e.name, repr(e.sum_v_lambda), repr(e.sum_v_2lambda), repr(e.p)]
                )


def _check_partitions(partitions: Mapping[str, np.ndarray], dim: int) -> None:
    seen = np.concatenate([np.asarray(idx, dtype=np.intp) for idx in partitions.values()])
    if seen.size != dim or not np.array_equal(np.sort(seen), np.arange(dim)):
        raise ConfigError("partitions must be disjoint and cover every parameter index")


def power_law(
    meas_lam: GradientVariationMeasurement,
    meas_2lam: GradientVariationMeasurement,
    partitions: Mapping[str, np.ndarray],
) -> PowerLawReport:
    """Fit v(lam) ~ lam^p per partition from measurements at lam and 2*lam.

    A partition whose variation sum vanishes at either scale gets an
    undefined exponent (flagged, not fatal).
    """
    if meas_lam.v.shape != meas_2lam.v.shape:
        raise ConfigError("measurements have mismatched dimension")
    if not math.isclose(meas_2lam.lam, 2.0 * meas_lam.lam, rel_tol=1e-12):
        raise ConfigError("second measurement must be taken at exactly twice the probe distance")
    _check_partitions(partitions, meas_lam.v.shape[0])
    entries = []
    for name, idx in partitions.items():
        idx = np.asarray(idx, dtype=np.intp)
        s1 = float(np.sum(meas_lam.v[idx]))
        s2 = float(np.sum(meas_2lam.v[idx]))
        defined = s1 > 0.0 and s2 > 0.0
        p = math.log2(s2) - math.log2(s1) if defined else math.nan
        entries.append(PartitionPowerLaw(name, s1, s2, p, defined))
    return PowerLawReport(meas_lam.lam, tuple(entries))
