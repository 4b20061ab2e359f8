"""Variance-bound verification on the half-discrete space {0,1}^S x R^n.

The central check: for f with square-integrable partials under the uniform
cube measure tensored with the standard Gaussian,

    Var(f) <= sum_q ||grad_q f||_2^2
              + sum_i ||df/dy_i||_2^2 * phi(||df/dy_i||_1 / ||df/dy_i||_2),

where grad_q is the discrete centering in bit q.  The phi factor is at most 1
(Cauchy-Schwarz puts the norm ratio in [0,1]), so the bound never exceeds the
plain Poincare bound; it gains a log factor when the gradient mass is spread.
Two corollaries with explicit constants are verified as well: the gamma-type
bound with the c(k)-weighted ratio, and the unidimensional change of
variables through the quantile coupling.

Every check returns an :class:`InequalityReport` whose margin is the audit
trail: the inequalities are theorems, so a margin below -tolerance signals an
implementation bug, never new mathematics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Callable, Optional

import numpy as np

from . import gaussian
from .edge_distributions import EdgeDistribution, psi as _psi, sample as _dist_sample
from .gaussian import QuadratureRule
from .phi import phi

MIN_MC_SAMPLES = 1000
MAX_QUAD_CONT = 6


@dataclass(frozen=True)
class TestFunction:
    """A function on {0,1}^n_bits x R^n_cont with analytic partials.

    ``fn`` and each partial must broadcast: they receive arrays whose last
    axis indexes bits (respectively coordinates) and return the leading shape.
    """
    name: str
    n_bits: int
    n_cont: int
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    partials: tuple[Callable[[np.ndarray, np.ndarray], np.ndarray], ...]

    def __post_init__(self):
        if self.n_cont < 1:
            raise ValueError("n_cont must be >= 1")
        if len(self.partials) != self.n_cont:
            raise ValueError("need one partial per continuous coordinate")


@dataclass(frozen=True)
class ContinuousTerm:
    index: int
    l1: float
    l2sq: float
    ratio: float
    phi_of_ratio: float
    contribution: float


@dataclass(frozen=True)
class InequalityReport:
    lhs_variance: float
    discrete_term: float
    continuous_terms: tuple[ContinuousTerm, ...]
    rhs_total: float
    margin: float
    method: str
    error_estimate: float
    tolerance: float
    passed: bool


def _cube(n_bits: int) -> np.ndarray:
    if n_bits == 0:
        return np.zeros((1, 0))
    ids = np.arange(1 << n_bits, dtype=np.int64)
    return ((ids[:, None] >> np.arange(n_bits)) & 1).astype(float)


def _tensor_grid(rule: QuadratureRule, n: int) -> tuple[np.ndarray, np.ndarray]:
    grids = np.meshgrid(*([rule.nodes] * n), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = reduce(np.multiply.outer, [rule.weights] * n).ravel()
    return nodes, weights


def _term_from_norms(index: int, l1: float, l2sq: float,
                     ratio_scale: float = 1.0, prefactor: float = 1.0) -> ContinuousTerm:
    if l2sq <= 0.0:
        return ContinuousTerm(index=index, l1=l1, l2sq=l2sq, ratio=0.0,
                              phi_of_ratio=0.0, contribution=0.0)
    ratio = min(ratio_scale * l1 / math.sqrt(l2sq), 1.0)
    ph = phi(ratio)
    return ContinuousTerm(index=index, l1=l1, l2sq=l2sq, ratio=ratio,
                          phi_of_ratio=ph, contribution=prefactor * l2sq * ph)


def _phi_slope(r: float, h: float = 1e-6) -> float:
    lo = max(r - h, 0.0)
    hi = min(r + h, 1.0)
    return (phi(hi) - phi(lo)) / (hi - lo)


def discrete_gradient_norm(tf: TestFunction, q: int,
                           rule: Optional[QuadratureRule] = None) -> float:
    """Squared L2 norm of the discrete gradient in bit q.

    The gradient is (f(x) - f(x with bit q flipped)) / 2, averaged over the
    cube and the Gaussian coordinates.
    """
    if not (0 <= q < tf.n_bits):
        raise ValueError("bit index out of range")
    rule = rule or gaussian.hermite_rule()
    cube = _cube(tf.n_bits)
    nodes, weights = _tensor_grid(rule, tf.n_cont)
    vals = np.asarray(tf.fn(cube[:, None, :], nodes[None, :, :]), dtype=float)
    vals = np.broadcast_to(vals, (cube.shape[0], nodes.shape[0]))
    perm = np.arange(cube.shape[0]) ^ (1 << q)
    grad = 0.5 * (vals - vals[perm])
    return float(np.mean((grad ** 2) @ weights))


def _quad_report(tf: TestFunction, rule: QuadratureRule) -> InequalityReport:
    if tf.n_cont > MAX_QUAD_CONT:
        raise ValueError(f"tensor quadrature supports n_cont <= {MAX_QUAD_CONT}")
    cube = _cube(tf.n_bits)
    nodes, weights = _tensor_grid(rule, tf.n_cont)
    k = cube.shape[0]

    vals = np.asarray(tf.fn(cube[:, None, :], nodes[None, :, :]), dtype=float)
    vals = np.broadcast_to(vals, (k, nodes.shape[0]))
    col = vals @ weights
    mean = float(np.mean(col))
    second = float(np.mean((vals ** 2) @ weights))
    lhs = second - mean * mean

    discrete = 0.0
    for q in range(tf.n_bits):
        perm = np.arange(k) ^ (1 << q)
        grad = 0.5 * (vals - vals[perm])
        discrete += float(np.mean((grad ** 2) @ weights))

    terms = []
    for i, dfun in enumerate(tf.partials):
        dvals = np.asarray(dfun(cube[:, None, :], nodes[None, :, :]), dtype=float)
        dvals = np.broadcast_to(dvals, (k, nodes.shape[0]))
        l1 = float(np.mean(np.abs(dvals) @ weights))
        l2sq = float(np.mean((dvals ** 2) @ weights))
        terms.append(_term_from_norms(i, l1, l2sq))

    rhs = discrete + sum(t.contribution for t in terms)
    margin = rhs - lhs
    tol = 1e-6 * (1.0 + rhs)
    return InequalityReport(lhs_variance=lhs, discrete_term=discrete,
                            continuous_terms=tuple(terms), rhs_total=rhs,
                            margin=margin, method="quadrature",
                            error_estimate=0.0, tolerance=tol,
                            passed=margin >= -tol)


def _variance_and_se(vals: np.ndarray) -> tuple[float, float]:
    n = vals.size
    var = float(np.var(vals, ddof=1))
    centered = vals - vals.mean()
    m4 = float(np.mean(centered ** 4))
    se = math.sqrt(max(m4 - var * var, 0.0) / n)
    return var, se


def _term_se(dvals: np.ndarray, term: ContinuousTerm, ratio_scale: float,
             prefactor: float) -> float:
    """Delta-method standard error of one phi-weighted contribution."""
    if term.l2sq <= 0.0:
        return 0.0
    n = dvals.size
    absd = np.abs(dvals)
    sq = dvals ** 2
    cov = np.cov(np.stack([absd, sq])) / n
    r = term.ratio
    slope = _phi_slope(r)
    l2 = math.sqrt(term.l2sq)
    d_da = ratio_scale * l2 * slope if r < 1.0 else 0.0
    d_db = term.phi_of_ratio - (0.5 * r * slope if r < 1.0 else 0.0)
    grad = np.array([d_da, d_db])
    var = float(grad @ cov @ grad)
    return prefactor * math.sqrt(max(var, 0.0))


def _mc_report(tf: TestFunction, samples: int, seed: int) -> InequalityReport:
    if samples < MIN_MC_SAMPLES:
        raise ValueError(f"Monte Carlo mode needs at least {MIN_MC_SAMPLES} samples")
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, size=(samples, tf.n_bits)).astype(float)
    y = rng.standard_normal((samples, tf.n_cont))

    vals = np.asarray(tf.fn(x, y), dtype=float)
    lhs, lhs_se = _variance_and_se(vals)

    disc_samples = np.zeros(samples)
    for q in range(tf.n_bits):
        xq = x.copy()
        xq[:, q] = 1.0 - xq[:, q]
        flipped = np.asarray(tf.fn(xq, y), dtype=float)
        disc_samples += (0.5 * (vals - flipped)) ** 2
    discrete = float(np.mean(disc_samples))
    disc_se = float(np.std(disc_samples, ddof=1)) / math.sqrt(samples) if tf.n_bits else 0.0

    terms = []
    rhs_var = disc_se ** 2
    for i, dfun in enumerate(tf.partials):
        dvals = np.asarray(dfun(x, y), dtype=float)
        dvals = np.broadcast_to(dvals, (samples,))
        l1 = float(np.mean(np.abs(dvals)))
        l2sq = float(np.mean(dvals ** 2))
        term = _term_from_norms(i, l1, l2sq)
        terms.append(term)
        rhs_var += _term_se(dvals, term, 1.0, 1.0) ** 2

    rhs = discrete + sum(t.contribution for t in terms)
    margin = rhs - lhs
    combined = math.hypot(lhs_se, math.sqrt(rhs_var))
    tol = 3.0 * combined
    return InequalityReport(lhs_variance=lhs, discrete_term=discrete,
                            continuous_terms=tuple(terms), rhs_total=rhs,
                            margin=margin, method="monte-carlo",
                            error_estimate=combined, tolerance=tol,
                            passed=margin >= -tol)


def verify_modified_poincare(tf: TestFunction, rule: Optional[QuadratureRule] = None,
                             mc: Optional[dict] = None) -> InequalityReport:
    """Verify the phi-weighted variance bound for one test function.

    Exactly one of ``rule`` (tensor quadrature, n_cont <= 6) or ``mc``
    (dict with ``samples`` and ``seed``) selects the evaluation method.
    """
    if (rule is None) == (mc is None):
        raise ValueError("pass exactly one of rule= or mc=")
    if rule is not None:
        return _quad_report(tf, rule)
    return _mc_report(tf, int(mc["samples"]), int(mc.get("seed", 0)))


@dataclass(frozen=True)
class VarianceSplitReport:
    lhs: float
    rhs: float
    discrepancy: float


def verify_variance_split(tf: TestFunction, rule: QuadratureRule) -> VarianceSplitReport:
    """Check Var(f) = E[Var over the cube] + Var[cube average] exactly."""
    cube = _cube(tf.n_bits)
    nodes, weights = _tensor_grid(rule, tf.n_cont)
    k = cube.shape[0]
    vals = np.asarray(tf.fn(cube[:, None, :], nodes[None, :, :]), dtype=float)
    vals = np.broadcast_to(vals, (k, nodes.shape[0]))

    col_mean = vals.mean(axis=0)
    col_var = (vals ** 2).mean(axis=0) - col_mean ** 2
    within = float(col_var @ weights)
    between = float((col_mean ** 2) @ weights) - float(col_mean @ weights) ** 2

    mean = float(col_mean @ weights)
    total = float(np.mean((vals ** 2) @ weights)) - mean * mean
    rhs = within + between
    return VarianceSplitReport(lhs=total, rhs=rhs, discrepancy=abs(total - rhs))


@dataclass(frozen=True)
class TensorisationReport:
    variance: float
    gradient_sum: float
    holds: bool


def verify_tensorisation(g: Callable[[np.ndarray], np.ndarray],
                         n_bits: int) -> TensorisationReport:
    """Exhaustively check Var(g) <= sum_q ||grad_q g||^2 on the cube."""
    if n_bits > 20:
        raise ValueError("exhaustive enumeration is limited to 20 bits")
    cube = _cube(n_bits)
    vals = np.asarray(g(cube), dtype=float)
    var = float(np.mean(vals ** 2) - np.mean(vals) ** 2)
    total = 0.0
    for q in range(n_bits):
        perm = np.arange(cube.shape[0]) ^ (1 << q)
        total += float(np.mean((0.5 * (vals - vals[perm])) ** 2))
    return TensorisationReport(variance=var, gradient_sum=total,
                               holds=var <= total + 1e-12)


def _wallis(m: int) -> float:
    """int_0^pi sin(t)^m dt by the two-term recurrence."""
    val = math.pi if m % 2 == 0 else 2.0
    k = 2 if m % 2 == 0 else 3
    while k <= m:
        val *= (k - 1) / k
        k += 2
    return val


def c_k(k: int) -> float:
    """The ratio constant 2*sqrt(k) / ((k-1) * int_0^pi sin^(k-2)); in (0, 1)."""
    if k < 2 or int(k) != k:
        raise ValueError("k must be an integer >= 2")
    return 2.0 * math.sqrt(k) / ((k - 1) * _wallis(k - 2))


def verify_chi2_inequality(g: Callable, gprime: Callable, k: int, alpha: float,
                           samples: int, seed: int) -> InequalityReport:
    """Monte Carlo check of the gamma-type variance bound in one dimension.

    Under the law with density proportional to e^{-alpha t} t^{k/2-1}:
    Var(g) <= (2/alpha) * ||D||_2^2 * phi(c(k) ||D||_1/||D||_2) with
    D(y) = g'(y) sqrt(y).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if samples < MIN_MC_SAMPLES:
        raise ValueError(f"need at least {MIN_MC_SAMPLES} samples")
    ck = c_k(k)
    rng = np.random.default_rng(seed)
    y = rng.gamma(shape=k / 2.0, scale=1.0 / alpha, size=samples)

    vals = np.asarray(g(y), dtype=float)
    vals = np.broadcast_to(vals, (samples,))
    lhs, lhs_se = _variance_and_se(vals)

    dvals = np.asarray(gprime(y), dtype=float) * np.sqrt(y)
    dvals = np.broadcast_to(dvals, (samples,))
    l1 = float(np.mean(np.abs(dvals)))
    l2sq = float(np.mean(dvals ** 2))
    pref = 2.0 / alpha
    term = _term_from_norms(0, l1, l2sq, ratio_scale=ck, prefactor=pref)
    rhs = term.contribution
    rhs_se = _term_se(dvals, term, ck, pref)

    margin = rhs - lhs
    combined = math.hypot(lhs_se, rhs_se)
    tol = 3.0 * combined
    return InequalityReport(lhs_variance=lhs, discrete_term=0.0,
                            continuous_terms=(term,), rhs_total=rhs,
                            margin=margin, method="monte-carlo",
                            error_estimate=combined, tolerance=tol,
                            passed=margin >= -tol)


def verify_change_of_variables(f: Callable, fprime: Callable,
                               dist: EdgeDistribution,
                               samples: int, seed: int) -> InequalityReport:
    """Monte Carlo check of the quantile-coupling variance bound.

    Under the edge law: Var(f) <= 2 * ||D||_2^2 * phi(||D||_1/||D||_2) with
    D(y) = psi(y) f'(y).
    """
    if samples < MIN_MC_SAMPLES:
        raise ValueError(f"need at least {MIN_MC_SAMPLES} samples")
    y = _dist_sample(dist, seed, samples)

    vals = np.asarray(f(y), dtype=float)
    vals = np.broadcast_to(vals, (samples,))
    lhs, lhs_se = _variance_and_se(vals)

    dvals = _psi(dist, y) * np.asarray(fprime(y), dtype=float)
    dvals = np.broadcast_to(dvals, (samples,))
    l1 = float(np.mean(np.abs(dvals)))
    l2sq = float(np.mean(dvals ** 2))
    term = _term_from_norms(0, l1, l2sq, prefactor=2.0)
    rhs = term.contribution
    rhs_se = _term_se(dvals, term, 1.0, 2.0)

    margin = rhs - lhs
    combined = math.hypot(lhs_se, rhs_se)
    tol = 3.0 * combined
    return InequalityReport(lhs_variance=lhs, discrete_term=0.0,
                            continuous_terms=(term,), rhs_total=rhs,
                            margin=margin, method="monte-carlo",
                            error_estimate=combined, tolerance=tol,
                            passed=margin >= -tol)


def _lead(x: np.ndarray, y: np.ndarray, value: float) -> np.ndarray:
    shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
    return np.full(shape, value)


REGISTRY: dict[str, TestFunction] = {}


def _register(tf: TestFunction) -> None:
    REGISTRY[tf.name] = tf


_register(TestFunction("linear-1d", 0, 1,
                       lambda x, y: y[..., 0],
                       (lambda x, y: _lead(x, y, 1.0),)))
_register(TestFunction("quadratic-1d", 0, 1,
                       lambda x, y: y[..., 0] ** 2,
                       (lambda x, y: 2.0 * y[..., 0],)))
_register(TestFunction("cubic-1d", 0, 1,
                       lambda x, y: y[..., 0] ** 3,
                       (lambda x, y: 3.0 * y[..., 0] ** 2,)))
_register(TestFunction("sin-1d", 0, 1,
                       lambda x, y: np.sin(y[..., 0]),
                       (lambda x, y: np.cos(y[..., 0]),)))
_register(TestFunction("exp-half-1d", 0, 1,
                       lambda x, y: np.exp(0.5 * y[..., 0]),
                       (lambda x, y: 0.5 * np.exp(0.5 * y[..., 0]),)))
_register(TestFunction("sum-2d", 0, 2,
                       lambda x, y: y[..., 0] + y[..., 1],
                       (lambda x, y: _lead(x, y, 1.0),
                        lambda x, y: _lead(x, y, 1.0))))
_register(TestFunction("product-2d", 0, 2,
                       lambda x, y: y[..., 0] * y[..., 1],
                       (lambda x, y: y[..., 1] + 0.0 * y[..., 0],
                        lambda x, y: y[..., 0] + 0.0 * y[..., 1])))
_register(TestFunction("bit-single", 1, 1,
                       lambda x, y: x[..., 0] + 0.0 * y[..., 0],
                       (lambda x, y: _lead(x, y, 0.0),)))
_register(TestFunction("bit-times-gauss", 1, 1,
                       lambda x, y: x[..., 0] * y[..., 0],
                       (lambda x, y: x[..., 0] + 0.0 * y[..., 0],)))
_register(TestFunction("bit-plus-gauss", 1, 1,
                       lambda x, y: x[..., 0] + y[..., 0],
                       (lambda x, y: _lead(x, y, 1.0),)))
_register(TestFunction("parity-2bit", 2, 1,
                       lambda x, y: x[..., 0] + x[..., 1] - 2.0 * x[..., 0] * x[..., 1]
                       + 0.0 * y[..., 0],
                       (lambda x, y: _lead(x, y, 0.0),)))
_register(TestFunction("mixed-bit-quadratic", 1, 2,
                       lambda x, y: (x[..., 0] - 0.5) * (y[..., 0] ** 2 - 1.0) + y[..., 1],
                       (lambda x, y: 2.0 * y[..., 0] * (x[..., 0] - 0.5),
                        lambda x, y: _lead(x, y, 1.0))))
