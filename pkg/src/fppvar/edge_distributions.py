"""Edge-time distribution families and the nearly-gamma classifier.

An :class:`EdgeDistribution` is a continuous law on the nonnegative half-line
with positive density on an open interval.  The quantile-coupling factor

    psi(y) = pdf_at_quantile(H(y)) / h(y)

converts Gaussian gradient norms into gradient norms under the law, and the
"nearly gamma" class is exactly the class where psi is O(sqrt(y)) with
polynomially small sub-level mass.  Membership is checked two ways: a
sufficient-condition route (power behaviour of the density at the support
endpoints, integral tail-ratio for unbounded support) and a direct-evidence
route (fitted constants on a quantile grid).  Both are numerical evidence,
not proof; the asymptotic conditions themselves are not decidable by finite
computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from . import gaussian

# Theta-style checks accept a spread of at most BAND^2 between the smallest
# and largest observed ratio, and require the window endpoints to move by
# less than DRIFT under grid refinement toward the limit.
BAND = 5.0
DRIFT = 0.8


@dataclass(frozen=True)
class EdgeDistribution:
    """A continuous edge-time law with density, cdf, quantile and sampler.

    ``left_exponent`` is the analytic power alpha with h(x) ~ (x - lo)^alpha
    near the lower endpoint; ``right_exponent`` the mirrored beta for finite
    upper endpoints (None when unknown or when the support is unbounded).
    """
    name: str
    lo: float
    hi: float
    left_exponent: Optional[float]
    right_exponent: Optional[float]
    dist: stats.distributions.rv_frozen = field(repr=False)

    def pdf(self, y):
        return self.dist.pdf(y)

    def logpdf(self, y):
        return self.dist.logpdf(y)

    def cdf(self, y):
        return self.dist.cdf(y)

    def sf(self, y):
        return self.dist.sf(y)

    def logsf(self, y):
        return self.dist.logsf(y)

    def ppf(self, p):
        return self.dist.ppf(p)

    def mean(self) -> float:
        return float(self.dist.mean())

    def std(self) -> float:
        return float(self.dist.std())


def exponential(rate: float = 1.0) -> EdgeDistribution:
    if rate <= 0:
        raise ValueError("rate must be positive")
    return EdgeDistribution(name=f"exp:rate={rate:g}", lo=0.0, hi=math.inf,
                            left_exponent=0.0, right_exponent=None,
                            dist=stats.expon(scale=1.0 / rate))


def gamma_family(shape: float, rate: float = 1.0) -> EdgeDistribution:
    if shape <= 0 or rate <= 0:
        raise ValueError("shape and rate must be positive")
    return EdgeDistribution(name=f"gamma:shape={shape:g},rate={rate:g}",
                            lo=0.0, hi=math.inf,
                            left_exponent=shape - 1.0, right_exponent=None,
                            dist=stats.gamma(a=shape, scale=1.0 / rate))


def beta_family(a: float, b: float) -> EdgeDistribution:
    if a <= 0 or b <= 0:
        raise ValueError("beta parameters must be positive")
    return EdgeDistribution(name=f"beta:a={a:g},b={b:g}", lo=0.0, hi=1.0,
                            left_exponent=a - 1.0, right_exponent=b - 1.0,
                            dist=stats.beta(a, b))


def uniform_family(lo: float = 0.0, hi: float = 1.0) -> EdgeDistribution:
    if not (0.0 <= lo < hi):
        raise ValueError("uniform support needs 0 <= lo < hi")
    return EdgeDistribution(name=f"uniform:lo={lo:g},hi={hi:g}", lo=lo, hi=hi,
                            left_exponent=0.0, right_exponent=0.0,
                            dist=stats.uniform(loc=lo, scale=hi - lo))


def chi2_family(k: float = 2.0, alpha: float = 0.5) -> EdgeDistribution:
    """Density proportional to e^{-alpha t} t^{k/2 - 1} on t > 0."""
    if k <= 0 or alpha <= 0:
        raise ValueError("k and alpha must be positive")
    return EdgeDistribution(name=f"chi2:k={k:g},alpha={alpha:g}",
                            lo=0.0, hi=math.inf,
                            left_exponent=k / 2.0 - 1.0, right_exponent=None,
                            dist=stats.gamma(a=k / 2.0, scale=1.0 / alpha))


def half_normal() -> EdgeDistribution:
    return EdgeDistribution(name="halfnormal", lo=0.0, hi=math.inf,
                            left_exponent=0.0, right_exponent=None,
                            dist=stats.halfnorm())


_FAMILIES = {
    "exp": (exponential, {"rate": 1.0}),
    "gamma": (gamma_family, {"shape": 2.0, "rate": 1.0}),
    "beta": (beta_family, {"a": 2.0, "b": 3.0}),
    "uniform": (uniform_family, {"lo": 0.0, "hi": 1.0}),
    "chi2": (chi2_family, {"k": 2.0, "alpha": 0.5}),
    "halfnormal": (half_normal, {}),
}


def parse_distribution(spec: str) -> EdgeDistribution:
    """Build a distribution from a spec string like ``gamma:shape=2,rate=1``."""
    name, _, argstr = spec.strip().partition(":")
    if name not in _FAMILIES:
        raise ValueError(f"unknown distribution family {name!r}")
    ctor, defaults = _FAMILIES[name]
    kwargs = dict(defaults)
    if argstr:
        for pair in argstr.split(","):
            key, eq, val = pair.partition("=")
            key = key.strip()
            if not eq or key not in defaults:
                raise ValueError(f"bad distribution parameter {pair!r} for {name!r}")
            kwargs[key] = float(val)
    return ctor(**kwargs)


def psi(dist: EdgeDistribution, y):
    """Quantile-coupling factor pdf_at_quantile(H(y)) / h(y) on the open support.

    The small side of (H, 1-H) feeds the tail-stable composition so the value
    stays accurate when y sits deep in either tail.
    """
    arr = np.asarray(y, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr <= dist.lo) or np.any(arr >= dist.hi):
        raise ValueError("y must lie strictly inside the support")
    cdfv = np.asarray(dist.cdf(arr), dtype=float)
    sfv = np.asarray(dist.sf(arr), dtype=float)
    small = np.where(cdfv <= 0.5, cdfv, sfv)
    if np.any(small <= 0.0):
        raise ValueError("cdf underflow: y is too deep in the tail to resolve")
    dens = np.asarray(dist.pdf(arr), dtype=float)
    out = gaussian.pdf_at_quantile(small) / dens
    return float(out[0]) if scalar else out


def sample(dist: EdgeDistribution, seed, n: int) -> np.ndarray:
    """Deterministic inverse-cdf sampling; ``seed`` may be an int or SeedSequence."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    # u == 0 occurs with probability 2^-53 and would land on the support endpoint
    np.clip(u, 2.220446049250313e-16, None, out=u)
    return np.asarray(dist.ppf(u), dtype=float)


@dataclass
class NearGammaReport:
    distribution: str
    direct_A_hat: Optional[float] = None
    direct_epsilon_hat: Optional[float] = None
    direct_pass: Optional[bool] = None
    sufficient_alpha_ok: Optional[bool] = None
    sufficient_beta_or_tail_ok: Optional[bool] = None
    tail_constants: Optional[tuple[float, float]] = None
    verdict: str = ""


def _window(vals: np.ndarray) -> tuple[float, float]:
    vals = vals[np.isfinite(vals)]
    if vals.size == 0 or np.any(vals <= 0.0):
        return 0.0, math.inf
    return float(vals.min()), float(vals.max())


def _stable_ratio(fn, base: np.ndarray, refined: np.ndarray) -> tuple[bool, float, float]:
    """True when fn stays within a factor BAND^2 on the base grid and its
    window endpoints move by less than DRIFT under refinement."""
    lo1, hi1 = _window(np.asarray(fn(base), dtype=float))
    lo2, hi2 = _window(np.asarray(fn(refined), dtype=float))
    if lo1 <= 0.0 or not math.isfinite(hi1):
        return False, lo1, hi1
    spread_ok = hi1 / lo1 <= BAND * BAND
    drift_ok = (lo2 >= DRIFT * lo1) and (hi2 <= hi1 / DRIFT) and lo2 > 0.0
    return spread_ok and drift_ok, lo1, hi1


def _endpoint_power_ok(dist: EdgeDistribution, endpoint: float, exponent: float,
                       anchor: float) -> bool:
    """Check h(x) / |x - endpoint|^exponent stabilizes approaching the endpoint."""
    span = abs(anchor - endpoint)
    sign = 1.0 if anchor > endpoint else -1.0

    def ratio(offsets):
        x = endpoint + sign * offsets
        return dist.pdf(x) / offsets ** exponent

    base = span * np.logspace(-1, -6, 60)
    refined = span * np.logspace(-1, -9, 90)
    ok, _, _ = _stable_ratio(ratio, base, refined)
    return ok


def _tail_ratio_ok(dist: EdgeDistribution) -> tuple[bool, float, float]:
    """Check sf(t)/pdf(t) is bounded between positive constants in the far tail."""
    start = float(dist.ppf(0.9))
    end = max(40.0 * dist.std(), 2.0 * start)

    def ratio(ts):
        return np.exp(dist.logsf(ts) - dist.logpdf(ts))

    base = np.linspace(start, end, 120)
    refined = np.linspace(start, 2.0 * end, 240)
    ok, lo, hi = _stable_ratio(ratio, base, refined)
    return ok, lo, hi


def check_near_gamma_sufficient(dist: EdgeDistribution) -> NearGammaReport:
    """Sufficient-condition route: density power at the lower endpoint, plus
    either a mirrored power at a finite upper endpoint or a bounded
    tail-mass/density ratio for unbounded support."""
    rep = NearGammaReport(distribution=dist.name)
    finite_hi = math.isfinite(dist.hi)
    if dist.left_exponent is None or (finite_hi and dist.right_exponent is None):
        rep.verdict = "not-checkable-by-sufficient-conditions"
        return rep

    anchor = float(dist.ppf(0.25))
    rep.sufficient_alpha_ok = _endpoint_power_ok(dist, dist.lo, dist.left_exponent, anchor)
    if finite_hi:
        anchor_hi = float(dist.ppf(0.75))
        rep.sufficient_beta_or_tail_ok = _endpoint_power_ok(
            dist, dist.hi, dist.right_exponent, anchor_hi)
    else:
        ok, lo, hi = _tail_ratio_ok(dist)
        rep.sufficient_beta_or_tail_ok = ok
        rep.tail_constants = (lo, hi)

    both = rep.sufficient_alpha_ok and rep.sufficient_beta_or_tail_ok
    rep.verdict = "sufficient-conditions-pass" if both else "fail"
    return rep


def _direct_stats(dist: EdgeDistribution, m: int) -> tuple[float, float, int]:
    p = (np.arange(m) + 0.5) / m
    ys = np.asarray(dist.ppf(p), dtype=float)
    psis = psi(dist, ys)
    a_hat = float(np.max(psis / np.sqrt(ys)))

    a_grid = np.geomspace(1e-4, 1e-1, 13)
    frac = np.array([np.mean(psis <= a) for a in a_grid])
    keep = frac > 0.0
    if keep.sum() >= 4:
        slope = float(np.polyfit(np.log(a_grid[keep]), np.log(frac[keep]), 1)[0])
    else:
        slope = math.nan
    return a_hat, slope, int(keep.sum())


def check_near_gamma_direct(dist: EdgeDistribution,
                            quantile_grid_size: int = 50_000) -> NearGammaReport:
    """Direct-evidence route on an equal-mass quantile grid.

    ``A_hat`` is the observed sup of psi(y)/sqrt(y); it must be stable under
    doubling the grid.  ``epsilon_hat`` is the fitted small-ball exponent of
    the sub-level mass over thresholds in [1e-4, 1e-1]; when psi never drops
    below the threshold range the sub-level condition holds vacuously.
    """
    if quantile_grid_size < 100:
        raise ValueError("quantile grid must have at least 100 points")
    m = int(quantile_grid_size)
    a1, _, _ = _direct_stats(dist, m)
    a2, slope, resolved = _direct_stats(dist, 2 * m)

    stable = math.isfinite(a1) and math.isfinite(a2) and abs(a2 - a1) < 0.10 * a1
    if resolved == 0:
        small_ball_ok = True  # no mass below 1e-1 at all
        slope = math.inf
    else:
        small_ball_ok = math.isfinite(slope) and slope > 0.05

    rep = NearGammaReport(distribution=dist.name, direct_A_hat=a2,
                          direct_epsilon_hat=slope,
                          direct_pass=stable and small_ball_ok)
    rep.verdict = "direct-evidence-only" if rep.direct_pass else "fail"
    return rep


def classify(dist: EdgeDistribution, quantile_grid_size: int = 50_000) -> NearGammaReport:
    """Run both routes and merge into a single report.

    The verdict is numerical evidence: "sufficient-conditions-pass" when the
    sufficient route succeeds, "direct-evidence-only" when only the fitted
    constants support membership, "fail" otherwise.
    """
    suff = check_near_gamma_sufficient(dist)
    direct = check_near_gamma_direct(dist, quantile_grid_size)
    rep = NearGammaReport(
        distribution=dist.name,
        direct_A_hat=direct.direct_A_hat,
        direct_epsilon_hat=direct.direct_epsilon_hat,
        direct_pass=direct.direct_pass,
        sufficient_alpha_ok=suff.sufficient_alpha_ok,
        sufficient_beta_or_tail_ok=suff.sufficient_beta_or_tail_ok,
        tail_constants=suff.tail_constants,
    )
    if suff.verdict == "sufficient-conditions-pass":
        rep.verdict = "sufficient-conditions-pass"
    elif direct.direct_pass:
        rep.verdict = "direct-evidence-only"
    else:
        rep.verdict = "fail"
    return rep
