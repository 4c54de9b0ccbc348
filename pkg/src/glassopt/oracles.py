"""Independent brute-force and Monte-Carlo oracles.

Every oracle here is built directly from the underlying construction it
validates — reflected random walks for the loss-increase bound, raw sampling
for the diagonal estimators, a literal network probe for the density-matrix
bound, an explicit underdetermined least-squares instance for quasi-Newton
overshoot — and never calls the code path it is checking. All oracles are
deterministic given their seed: trials are accumulated in a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import netkit
from .netkit import Batch, ConfigError, ModelSpec

_CHUNK = 20_000


# ---------------------------------------------------------------------------
# Reflected 1D glass walk (loss-increase bound)


@dataclass(frozen=True)
class SyntheticGlass1D:
    """A 1D walk of n equally spaced gradient kicks with density rho.

    Kicks are zero-mean with second moment rho*lam/n, either Gaussian (the
    limit distribution) or Rademacher-valued (robustness variant; both agree
    in the large-n limit).
    """

    rho: float
    lam: float
    n_kinks: int = 1000
    trials: int = 100_000
    seed: int = 0
    kick: str = "gauss"

    def __post_init__(self):
        if self.rho < 0:
            raise ConfigError("glass density rho must be >= 0")
        if self.lam <= 0:
            raise ConfigError("walk length lam must be > 0")
        if self.n_kinks < 1 or self.trials < 1:
            raise ConfigError("need at least one kink and one trial")
        if self.kick not in ("gauss", "rademacher"):
            raise ConfigError(f"unknown kick distribution {self.kick!r}")


@dataclass(frozen=True)
class GlassWalkResult:
    mean_abs: float
    mean_abs_se: float
    predicted_mean_abs: float
    variance: float
    variance_se: float
    predicted_variance: float
    trials: int


def glass_walk_expectation(sim: SyntheticGlass1D) -> GlassWalkResult:
    """Simulate the loss change of a 1D glass walk against its closed forms.

    Each trial integrates n kicks activating at equally spaced points along a
    move of length lam, giving Delta = lam * sum_j ((n-j)/n) * kick_j. The
    reflected trajectory |Delta| models a local loss floor; its mean is
    predicted to be sqrt(2 rho lam^3 / (3 pi)) and the unreflected variance
    rho lam^3 / 3.
    """
    rng = np.random.default_rng(sim.seed)
    n = sim.n_kinks
    weights = (n - np.arange(1, n + 1)) / n
    kick_scale = math.sqrt(sim.rho * sim.lam / n)
    s_abs = s_sq = s_delta = s_quad = 0.0
    done = 0
    while done < sim.trials:
        m = min(_CHUNK // max(n // 256, 1), sim.trials - done)
        if sim.kick == "gauss":
            kicks = rng.standard_normal((m, n))
        else:
            kicks = rng.integers(0, 2, size=(m, n)).astype(np.float64) * 2.0 - 1.0
        delta = sim.lam * kick_scale * (kicks @ weights)
        s_abs += float(np.sum(np.abs(delta)))
        s_sq += float(np.sum(delta * delta))
        s_delta += float(np.sum(delta))
        s_quad += float(np.sum(delta**4))
        done += m
    t = sim.trials
    mean_abs = s_abs / t
    m2 = s_sq / t  # second moment; the mean is 0 by construction
    variance = (s_sq - s_delta * s_delta / t) / max(t - 1, 1)
    mean_abs_se = math.sqrt(max(m2 - mean_abs * mean_abs, 0.0) / t)
    m4 = s_quad / t
    variance_se = math.sqrt(max(m4 - m2 * m2, 0.0) / t)
    return GlassWalkResult(
        mean_abs=mean_abs,
        mean_abs_se=mean_abs_se,
        predicted_mean_abs=math.sqrt(2.0 * sim.rho * sim.lam**3 / (3.0 * math.pi)),
        variance=variance,
        variance_se=variance_se,
        predicted_variance=sim.rho * sim.lam**3 / 3.0,
        trials=t,
    )


# ---------------------------------------------------------------------------
# Diagonal-estimator test matrices and Monte-Carlo sampling


@dataclass(frozen=True)
class TestMatrix:
    """Dense test matrix with known diagonal and off-diagonal row mass."""

    M: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.M, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ConfigError("test matrix must be square with d >= 2")
        if not np.all(np.isfinite(m)):
            raise ConfigError("test matrix must be finite")
        object.__setattr__(self, "M", m)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.M).copy()

    @property
    def dominance(self) -> np.ndarray:
        """Per-row omega_i^2 = sum_{j != i} M_ij^2 / M_ii^2."""
        off = (self.M * self.M).sum(axis=1) - np.diag(self.M) ** 2
        return off / np.diag(self.M) ** 2

    @staticmethod
    def random_diag_dominant(d: int, seed: int, omega_max: float = 1.0) -> "TestMatrix":
        """Random matrix with |diagonal| in [0.5, 1.5] and omega_i^2 <= omega_max."""
        rng = np.random.default_rng(seed)
        diag = rng.uniform(0.5, 1.5, size=d) * rng.choice([-1.0, 1.0], size=d)
        omega2 = rng.uniform(0.2, omega_max, size=d)
        off = rng.standard_normal((d, d))
        np.fill_diagonal(off, 0.0)
        row_norm = np.linalg.norm(off, axis=1)
        off *= (np.sqrt(omega2) * np.abs(diag) / row_norm)[:, None]
        m = off
        np.fill_diagonal(m, diag)
        return TestMatrix(m)


@dataclass(frozen=True)
class McEstimatorResult:
    """Per-diagonal-index sampling statistics of a kernel estimator."""

    estimate: np.ndarray
    bias: np.ndarray
    bias_se: np.ndarray
    variance: np.ndarray
    n_accepted: np.ndarray
    n_samples: int
    aggregate_bias: float
    aggregate_bias_se: float

    @property
    def aggregate_bias_z(self) -> float:
        return self.aggregate_bias / self.aggregate_bias_se


def _draw(rng: np.random.Generator, density: str, shape) -> np.ndarray:
    if density == "rademacher":
        return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
    return rng.standard_normal(shape)


def mc_estimator(
    tm: TestMatrix,
    density: str,
    kspec,
    n_samples: int,
    seed: int,
) -> McEstimatorResult:
    """Sample kappa(delta_i) * (M delta)_i and report bias and variance per index.

    The aggregate bias averages the per-sample row mean of (estimate - diag),
    which keeps cross-coordinate correlations inside its standard error; it
    is only meaningful for unrestricted kernels (every coordinate accepted).
    """
    if n_samples < 1000:
        raise ConfigError("estimator sampling needs at least 1e3 samples")
    d = tm.M.shape[0]
    diag = tm.diagonal
    rng = np.random.default_rng(seed)
    sums = np.zeros(d)
    sums_sq = np.zeros(d)
    n_acc = np.zeros(d, dtype=np.int64)
    agg_sum = 0.0
    agg_sum_sq = 0.0
    mt = np.ascontiguousarray(tm.M.T)
    done = 0
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        delta = _draw(rng, density, (m, d))
        y = delta @ mt
        from .glass import optimal_kernel_weight

        est = optimal_kernel_weight(delta, kspec) * y
        if kspec.restrict > 0:
            mask = np.abs(delta) >= kspec.restrict
            sums += np.sum(est, axis=0, where=mask)
            sums_sq += np.sum(est * est, axis=0, where=mask)
            n_acc += mask.sum(axis=0)
        else:
            sums += est.sum(axis=0)
            sums_sq += np.sum(est * est, axis=0)
            n_acc += m
            row_mean = (est - diag).mean(axis=1)
            agg_sum += float(row_mean.sum())
            agg_sum_sq += float(np.sum(row_mean * row_mean))
        done += m
    safe = np.maximum(n_acc, 1)
    mean = sums / safe
    var = (sums_sq - safe * mean * mean) / np.maximum(safe - 1, 1)
    bias = mean - diag
    bias_se = np.sqrt(var / safe)
    if kspec.restrict > 0:
        agg_bias = float(np.mean(bias))
        agg_se = math.nan
    else:
        agg_bias = agg_sum / n_samples
        agg_var = (agg_sum_sq - n_samples * agg_bias * agg_bias) / (n_samples - 1)
        agg_se = math.sqrt(agg_var / n_samples)
    return McEstimatorResult(
        estimate=mean,
        bias=bias,
        bias_se=bias_se,
        variance=var,
        n_accepted=n_acc,
        n_samples=int(n_samples),
        aggregate_bias=agg_bias,
        aggregate_bias_se=agg_se,
    )


# ---------------------------------------------------------------------------
# Density-matrix bound on a constructed uniform-preactivation network


@dataclass(frozen=True)
class GlassScenario:
    """A network whose hidden pre-activations are uniform on [-psi, psi]."""

    spec: ModelSpec
    params: np.ndarray
    batch: Batch
    psi: float


def build_uniform_preactivation_net(
    n_in: int = 120, n_hidden: int = 30, psi: float = 0.05, seed: int = 0
) -> GlassScenario:
    """Construct a 2-layer net with every hidden pre-activation uniform in [-psi, psi].

    A single fixed input is used and the first-layer biases are shifted so
    the pre-activations land on a seeded uniform draw, which makes the
    uniformity assumption of the density-matrix bound hold by construction.
    """
    spec = ModelSpec((n_in, n_hidden, 1), "mse")
    params = netkit.build_model(spec, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x67A55]))
    x = rng.standard_normal((1, n_in))
    target = rng.standard_normal((1, 1)) + 1.0
    batch = Batch(x, target)
    preacts, _ = netkit.forward(spec, params, batch.inputs)
    levels = rng.uniform(-psi, psi, size=n_hidden)
    _, b_sl, _ = spec.layer_slices()[0]
    params[b_sl] += levels - preacts[0][0]
    return GlassScenario(spec, params, batch, float(psi))


@dataclass(frozen=True)
class VariationCoverage:
    """Empirical gradient variations versus the density-matrix bound."""

    v: np.ndarray
    bound: np.ndarray
    fraction_within: float
    precondition_violation_fraction: float
    n_samples: int


def mc_variation(
    scenario: GlassScenario,
    r_matrix: np.ndarray,
    delta_scale: float,
    n_samples: int,
    seed: int,
) -> VariationCoverage:
    """Check empirical v(delta) <= R |delta| elementwise by direct sampling.

    Perturbations are Rademacher sign vectors of magnitude delta_scale.
    Samples whose projection onto a unit's pre-activation gradient reaches
    psi violate the small-step precondition; their fraction is reported.
    """
    if delta_scale < 0:
        raise ConfigError("delta_scale must be >= 0")
    spec, params, batch = scenario.spec, scenario.params, scenario.batch
    d = spec.param_count
    records = netkit.relu_introspect(spec, params, batch, scenario.psi)
    gy = np.stack([r.grad_y for r in records]) if records else np.zeros((0, d))
    rng = np.random.default_rng(seed)
    _, g0 = netkit.gradient(spec, params, batch)
    acc = np.zeros(d)
    violations = 0
    for _ in range(n_samples):
        signs = rng.integers(0, 2, size=d).astype(np.float64) * 2.0 - 1.0
        delta = delta_scale * signs
        _, g1 = netkit.gradient(spec, params + delta, batch)
        gamma = g1 - g0
        acc += gamma * gamma
        if gy.shape[0]:
            violations += int(np.count_nonzero(np.abs(gy @ delta) >= scenario.psi))
    v = acc / n_samples
    bound = np.asarray(r_matrix) @ np.full(d, delta_scale)
    checks = max(n_samples * gy.shape[0], 1)
    return VariationCoverage(
        v=v,
        bound=bound,
        fraction_within=float(np.mean(v <= bound)),
        precondition_violation_fraction=violations / checks,
        n_samples=int(n_samples),
    )


# ---------------------------------------------------------------------------
# Underdetermined least squares: diagonal QN steps are too greedy


@dataclass(frozen=True)
class LeastSquaresReport:
    loss_initial: float
    loss_full_step: float
    loss_damped_step: float
    full_step_norm: float
    min_norm_solution_norm: float
    damping: float


def underdetermined_ls(
    seed: int,
    n_rows: int = 10,
    n_cols: int = 100,
    damping: float = 0.1,
    zero_rhs: bool = False,
) -> LeastSquaresReport:
    """Full vs damped diagonal quasi-Newton step on 0.5 ||A x - b||^2 from x = 0.

    A is n_rows x n_cols Gaussian with n_rows << n_cols; the diagonal of
    A^T A badly underestimates curvature along A^T b, so the full step
    overshoots while a small damped fraction of it reduces the loss.
    zero_rhs forces b = 0 (the trivial fixed point at the origin).
    """
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_rows, n_cols))
    b = np.zeros(n_rows) if zero_rhs else rng.standard_normal(n_rows)

    def value(x):
        r = a @ x - b
        return 0.5 * float(r @ r)

    g0 = a.T @ (a @ np.zeros(n_cols) - b)
    h = (a * a).sum(axis=0)
    full_step = -g0 / h
    x_min = a.T @ np.linalg.solve(a @ a.T, b)
    return LeastSquaresReport(
        loss_initial=value(np.zeros(n_cols)),
        loss_full_step=value(full_step),
        loss_damped_step=value(damping * full_step),
        full_step_norm=float(np.linalg.norm(full_step)),
        min_norm_solution_norm=float(np.linalg.norm(x_min)),
        damping=float(damping),
    )


# ---------------------------------------------------------------------------
# Golden-section search for the per-coordinate step objective


def golden_section_min(fn, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Minimize a unimodal function on [lo, hi] by golden-section search."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def step_objective_argmin(g_i: float, h_i: float, rho_i: float, tol: float = 1e-12) -> float:
    """Brute-force minimizer magnitude of the per-coordinate step objective.

    Minimizes F(t) = -|g| t + h t^2 / 2 + sqrt(2 rho / (3 pi)) t^(3/2) over
    t >= 0, the descent-direction section of a linear plus quadratic plus
    glass-penalty model. The derivative is monotone, so the minimum is
    bracketed by doubling and then pinned by golden-section search. The
    signed step is -sign(g) times the returned magnitude.
    """
    if h_i < 0 or rho_i < 0:
        raise ConfigError("curvature and glass density must be nonnegative")
    mag = abs(g_i)
    if mag == 0.0:
        return 0.0
    a = math.sqrt(2.0 * rho_i / (3.0 * math.pi))

    def objective(t):
        return -mag * t + 0.5 * h_i * t * t + a * t**1.5

    def slope(t):
        return -mag + h_i * t + 1.5 * a * math.sqrt(t)

    hi = 1.0
    while slope(hi) < 0.0:
        hi *= 2.0
        if hi > 1e18:
            raise ConfigError("step objective has no finite minimizer")
    return golden_section_min(objective, 0.0, hi, tol)


# ---------------------------------------------------------------------------
# Closed-form and synthetic gradient fields for the power-law probe


def quadratic_powerlaw_oracle(h_matrix: np.ndarray, lam: float) -> np.ndarray:
    """Exact expected gradient variations of g(theta) = H theta under sign probes.

    For Rademacher delta, E[((H (lam delta))_i)^2] = lam^2 sum_j H_ij^2, the
    closed form behind the exponent-2 behavior of purely linear gradients.
    """
    h_matrix = np.asarray(h_matrix, dtype=np.float64)
    if h_matrix.ndim != 2 or h_matrix.shape[0] != h_matrix.shape[1]:
        raise ConfigError("H must be square")
    if not np.allclose(h_matrix, h_matrix.T):
        raise ConfigError("H must be symmetric")
    return lam * lam * (h_matrix * h_matrix).sum(axis=1)


@dataclass(frozen=True)
class StaircaseGradientField:
    """Dense piecewise-constant gradient field: glass with no smooth part.

    Coordinate i's gradient is magnitude * (signed count of thresholds below
    theta_i), a staircase with uniformly scattered jumps, so gradient
    variations grow exactly linearly in the probe distance.
    """

    thresholds: np.ndarray  # (d, n_kinks), sorted per row
    signs: np.ndarray  # (d, n_kinks) of +-1
    magnitude: float

    @staticmethod
    def random(d: int, n_kinks: int, span: float, magnitude: float, seed: int):
        rng = np.random.default_rng(seed)
        thresholds = np.sort(rng.uniform(-span, span, size=(d, n_kinks)), axis=1)
        signs = rng.integers(0, 2, size=(d, n_kinks)).astype(np.float64) * 2.0 - 1.0
        return StaircaseGradientField(thresholds, signs, float(magnitude))

    @property
    def dim(self) -> int:
        return self.thresholds.shape[0]

    @property
    def span(self) -> float:
        return float(np.abs(self.thresholds).max())

    def grad(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        crossed = self.thresholds < theta[:, None]
        return self.magnitude * np.sum(self.signs, axis=1, where=crossed)

    def expected_variation(self, lam: float) -> np.ndarray:
        """Closed-form E[gamma_i^2] for sign probes of scale lam around 0."""
        density = self.thresholds.shape[1] / (2.0 * self.span)
        return np.full(self.dim, self.magnitude**2 * density * lam)
