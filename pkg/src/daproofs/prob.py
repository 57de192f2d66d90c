"""Sampling probabilities for the 2k x 2k share matrix, with Monte Carlo.

The quantities, with q unavailable shares out of n = (2k)^2 (q defaults
to the unrecoverability minimum (k+1)^2):

- p1: one client drawing s distinct shares hits at least one unavailable
  share: 1 - prod_{i<s}(1 - q/(n-i)), equivalently the hypergeometric
  complement 1 - C(n-q, s)/C(n, s).
- pc: more than c_hat of c independent clients hit at least one
  unavailable share: binomial upper tail of p1. The tail is computed from
  the full CDF starting at j=0; pc_as_printed drops the j=0 term for
  comparison, which overstates the probability by (1-p1)^c.
- pe: c group drawings of s distinct elements out of n collectively see
  at least n - lam distinct elements. The inclusion-exclusion series is

      pe = 1 + sum_{i>=1} (-1)^i C(lam+i-1, lam) C(n, lam+i) W_i^c,
      W_i = C(n-lam-i, s) / C(n, s).

  (Published statements of this series sometimes carry the opposite sign
  on the sum, which yields values above one; the sign here is fixed by
  exhaustive enumeration at small n.) Terms are astronomically large and
  nearly cancel, so evaluation is exact big-rational up to n = 4096,
  log-space floating point with compensated summation beyond that, and
  Monte Carlo when cancellation makes floats meaningless.
- px: with d of c*s pooled, unlinkable sample requests denied, one
  client sees at least one of its s requests denied:
  sum_i C(s,i) C(s(c-1), d-i) / C(cs, d) = 1 - C(s(c-1), d)/C(cs, d).

gamma = k(3k-2) = n - (k+1)^2 + 1 is the distinct-share count that makes
the whole matrix recoverable; min_clients inverts pe for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

DEFAULT_TARGET = 0.99

_EXACT_N_LIMIT = 4096
_SERIES_ERROR_LIMIT = 1e-6


def unavailable_minimum(k: int) -> int:
    return (k + 1) ** 2


def recovery_threshold(k: int) -> int:
    """gamma: distinct shares that force recoverability of the 2k x 2k matrix."""
    return k * (3 * k - 2)


@dataclass(frozen=True)
class SamplingParams:
    """Parameter bundle for the sampling analysis."""

    k: int
    s: int
    c: int = 1
    c_hat: int = 0
    q: Optional[int] = None
    d: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be positive")
        if not 0 < self.s < unavailable_minimum(self.k):
            raise ValueError("s must satisfy 0 < s < (k+1)^2")
        if self.c < 1 or not 0 <= self.c_hat <= self.c:
            raise ValueError("client counts out of range")
        if self.d < 0 or self.d > self.c * self.s:
            raise ValueError("denied-request count out of range")
        q = self.q if self.q is not None else unavailable_minimum(self.k)
        if not 0 <= q <= self.matrix_cells:
            raise ValueError("unavailable share count out of range")

    @property
    def matrix_cells(self) -> int:
        return (2 * self.k) ** 2

    @property
    def unavailable(self) -> int:
        return self.q if self.q is not None else unavailable_minimum(self.k)

    @property
    def gamma(self) -> int:
        return recovery_threshold(self.k)

    @property
    def lam(self) -> int:
        return self.matrix_cells - self.gamma


# --- single-client hit probability -------------------------------------------


def p1(k: int, s: int, q: Optional[int] = None) -> float:
    """Probability one client sampling s distinct shares hits an unavailable one.

    With s larger than the available share count the hit is certain (the
    running product passes through zero).
    """
    n = (2 * k) ** 2
    if q is None:
        q = unavailable_minimum(k)
    if not 0 <= q <= n:
        raise ValueError("q out of range")
    if not 0 <= s <= n:
        raise ValueError("s must be in 0..n")
    miss = 1.0
    for i in range(s):
        factor = 1.0 - q / (n - i)
        if factor <= 0.0:
            return 1.0
        miss *= factor
    return 1.0 - miss


def p1_hypergeom(k: int, s: int, q: Optional[int] = None) -> float:
    """Same probability as 1 - C(n-q, s)/C(n, s), evaluated exactly."""
    n = (2 * k) ** 2
    if q is None:
        q = unavailable_minimum(k)
    if not 0 <= q <= n or not 0 <= s <= n:
        raise ValueError("parameters out of range")
    return float(1 - Fraction(math.comb(n - q, s), math.comb(n, s)))


def p1_limit(s: int) -> float:
    """Large-k limit of p1 at the unrecoverability minimum: 1 - (3/4)^s."""
    return 1.0 - 0.75 ** s


# --- multi-client detection ----------------------------------------------------


def _binom_cdf_terms(c: int, p: float, upto: int) -> float:
    """Sum of binomial pmf terms j = 0..upto, evaluated stably by recurrence."""
    if p >= 1.0:
        return 0.0 if upto < c else 1.0
    term = (1.0 - p) ** c
    if term == 0.0:
        # underflow: fall back to log-space accumulation
        log_term = c * math.log1p(-p)
        total = 0.0
        for j in range(upto + 1):
            total += math.exp(log_term)
            if j < c:
                log_term += math.log((c - j) / (j + 1)) + math.log(p) - math.log1p(-p)
        return min(total, 1.0)
    total = term
    for j in range(upto):
        term *= (c - j) / (j + 1) * p / (1.0 - p)
        total += term
    return min(total, 1.0)


def pc(k: int, s: int, c: int, c_hat: int, q: Optional[int] = None) -> float:
    """Probability that more than c_hat of c clients hit an unavailable share."""
    if not 0 <= c_hat <= c:
        raise ValueError("c_hat must be in 0..c")
    hit = p1(k, s, q)
    return 1.0 - _binom_cdf_terms(c, hit, c_hat)


def pc_as_printed(k: int, s: int, c: int, c_hat: int, q: Optional[int] = None) -> float:
    """Tail computed with the j=0 CDF term dropped (for comparison output)."""
    if not 0 <= c_hat <= c:
        raise ValueError("c_hat must be in 0..c")
    hit = p1(k, s, q)
    zero_term = (1.0 - hit) ** c
    return min(1.0, 1.0 - (_binom_cdf_terms(c, hit, c_hat) - zero_term))


# --- collective coverage (group-drawing coupon collection) ----------------------


def _check_pe_params(n: int, s: int, c: int, lam: int) -> None:
    if n < 1 or not 1 <= s <= n:
        raise ValueError("need 1 <= s <= n")
    if c < 1:
        raise ValueError("c must be positive")
    if not 0 <= lam < n:
        raise ValueError("lam must be in 0..n-1")


def pe_exact_fraction(n: int, s: int, c: int, lam: int) -> Fraction:
    """Exact series evaluation over the common denominator C(n, s)^c."""
    _check_pe_params(n, s, c, lam)
    denom_base = math.comb(n, s)
    total = 0
    for i in range(1, n - lam + 1):
        remaining = n - lam - i
        w_num = math.comb(remaining, s) if remaining >= s else 0
        if w_num == 0:
            break
        term = math.comb(lam + i - 1, lam) * math.comb(n, lam + i) * pow(w_num, c)
        total += -term if i % 2 else term
    return 1 + Fraction(total, pow(denom_base, c))


def pe_reaches(n: int, s: int, c: int, lam: int, target: Fraction) -> bool:
    """Exact integer test pe >= target, avoiding any float rounding."""
    _check_pe_params(n, s, c, lam)
    denom_base = math.comb(n, s)
    total = 0
    for i in range(1, n - lam + 1):
        remaining = n - lam - i
        w_num = math.comb(remaining, s) if remaining >= s else 0
        if w_num == 0:
            break
        term = math.comb(lam + i - 1, lam) * math.comb(n, lam + i) * pow(w_num, c)
        total += -term if i % 2 else term
    denom = pow(denom_base, c)
    # pe = (denom + total) / denom ; compare against target.num/target.den
    return (denom + total) * target.denominator >= target.numerator * denom


def pe_series_float(n: int, s: int, c: int, lam: int) -> tuple[float, float]:
    """Log-space series evaluation; returns (value, error estimate).

    The second value bounds the absolute rounding error left after the
    alternating terms cancel: the largest term's magnitude scaled by the
    working precision and term count. A probability needs it well below
    one; pe() treats anything above 1e-6 as meaningless.
    """
    _check_pe_params(n, s, c, lam)
    log_denom = math.lgamma(n + 1) - math.lgamma(s + 1) - math.lgamma(n - s + 1)
    logs: list[float] = []
    signs: list[float] = []
    for i in range(1, n - lam + 1):
        remaining = n - lam - i
        if remaining < s:
            break
        log_w = (
            math.lgamma(remaining + 1)
            - math.lgamma(s + 1)
            - math.lgamma(remaining - s + 1)
            - log_denom
        )
        log_term = (
            math.lgamma(lam + i) - math.lgamma(lam + 1) - math.lgamma(i)
            + math.lgamma(n + 1) - math.lgamma(lam + i + 1) - math.lgamma(n - lam - i + 1)
            + c * log_w
        )
        logs.append(log_term)
        signs.append(-1.0 if i % 2 else 1.0)
    if not logs:
        return 1.0, 0.0
    peak = max(logs)
    if peak >= 700.0:
        # terms overflow float64 outright
        return float("nan"), float("inf")
    # Neumaier-compensated sum of scaled terms
    total = 0.0
    comp = 0.0
    for log_term, sign in zip(logs, signs):
        value = sign * math.exp(log_term - peak)
        t = total + value
        if abs(total) >= abs(value):
            comp += (total - t) + value
        else:
            comp += (value - t) + total
        total = t
    result = 1.0 + math.exp(peak) * (total + comp)
    error = math.exp(peak) * len(logs) * 2.0 ** -52
    return result, error


def pe_dp_curve(
    n: int, s: int, lam: int, c_max: int, stop_at: Optional[float] = None
) -> np.ndarray:
    """pe for every c in 1..c_max via the distinct-count Markov chain.

    Entry [c] is the probability; entry [0] is 0. Stops early once the
    value reaches stop_at, leaving later entries at their last value.
    """
    _check_pe_params(n, s, c_max if c_max >= 1 else 1, lam)
    goal = n - lam
    log_cns = math.lgamma(n + 1) - math.lgamma(s + 1) - math.lgamma(n - s + 1)

    def log_comb(a: np.ndarray, b: int) -> np.ndarray:
        out = np.full(a.shape, -np.inf)
        ok = a >= b
        av = a[ok].astype(np.float64)
        out[ok] = (
            _lgamma(av + 1) - math.lgamma(b + 1) - _lgamma(av - b + 1)
        )
        return out

    zs = np.arange(n + 1)
    weights = []
    for j in range(s + 1):
        log_w = log_comb(n - zs, j) + log_comb(zs, s - j) - log_cns
        weights.append(np.exp(log_w))

    dist = np.zeros(n + 1)
    dist[s] = 1.0
    out = np.zeros(c_max + 1)
    out[1] = dist[goal:].sum()
    for c in range(2, c_max + 1):
        new = np.zeros(n + 1)
        for j in range(s + 1):
            contrib = dist * weights[j]
            if j:
                new[j:] += contrib[: n + 1 - j]
            else:
                new += contrib
        dist = new
        out[c] = dist[goal:].sum()
        if stop_at is not None and out[c] >= stop_at:
            out[c:] = out[c]
            break
    return out


_lgamma = np.vectorize(math.lgamma, otypes=[np.float64])


def pe_dp(n: int, s: int, c: int, lam: int) -> float:
    return float(pe_dp_curve(n, s, lam, c)[c])


def mc_pe(n: int, s: int, c: int, lam: int, trials: int = 100_000, seed: int = 0) -> float:
    """Monte Carlo estimate of pe by simulating the distinct-count chain."""
    _check_pe_params(n, s, c, lam)
    rng = np.random.default_rng(seed)
    z = np.full(trials, s, dtype=np.int64)
    for _ in range(c - 1):
        z += rng.hypergeometric(n - z, z, s)
    return float(np.mean(z >= n - lam))


def pe(n: int, s: int, c: int, lam: int, method: str = "auto") -> float:
    """Collective-coverage probability; see module docstring for methods."""
    if method == "exact":
        return float(pe_exact_fraction(n, s, c, lam))
    if method == "series":
        value, error = pe_series_float(n, s, c, lam)
        if not math.isfinite(value) or error > _SERIES_ERROR_LIMIT:
            raise ArithmeticError(
                f"series rounding error estimate {error:.2e} exceeds tolerance"
            )
        return min(max(value, 0.0), 1.0)
    if method == "dp":
        return pe_dp(n, s, c, lam)
    if method == "mc":
        return mc_pe(n, s, c, lam)
    if method == "auto":
        if n <= _EXACT_N_LIMIT:
            return float(pe_exact_fraction(n, s, c, lam))
        value, error = pe_series_float(n, s, c, lam)
        if math.isfinite(value) and error <= _SERIES_ERROR_LIMIT:
            return min(max(value, 0.0), 1.0)
        return mc_pe(n, s, c, lam)
    raise ValueError(f"unknown method {method!r}")


# --- minimum client counts ------------------------------------------------------


def _target_fraction(target: float) -> Fraction:
    return Fraction(str(target))


def min_clients(
    k: int,
    s: int,
    target: float = DEFAULT_TARGET,
    method: str = "auto",
    trials: int = 4000,
    seed: int = 2024,
) -> int:
    """Smallest c with pe(n=(2k)^2, s, c, lam) >= target.

    Searches the probability curve with the fast Markov chain, then pins
    the boundary with exact big-rational arithmetic when n is small
    enough; larger matrices use Monte Carlo hitting times.
    """
    n = (2 * k) ** 2
    lam = n - recovery_threshold(k)
    if method == "mc" or (method == "auto" and n > _EXACT_N_LIMIT):
        return mc_min_clients(k, s, target=target, trials=trials, seed=seed)

    c_max = max(8, (2 * n) // s)
    while True:
        curve = pe_dp_curve(n, s, lam, c_max, stop_at=min(target + 0.004, 1.0))
        over = np.nonzero(curve >= target)[0]
        if over.size:
            candidate = int(over[0])
            break
        c_max *= 2
        if c_max > 10_000_000:
            raise ArithmeticError("target unreachable within search bounds")

    goal = _target_fraction(target)
    while not pe_reaches(n, s, candidate, lam, goal):
        candidate += 1
    while candidate > 1 and pe_reaches(n, s, candidate - 1, lam, goal):
        candidate -= 1
    return candidate


def mc_min_clients(
    k: int,
    s: int,
    target: float = DEFAULT_TARGET,
    trials: int = 4000,
    seed: int = 2024,
) -> int:
    """Monte Carlo inversion: the target quantile of the first draw count
    at which the trials' distinct-share total reaches gamma."""
    n = (2 * k) ** 2
    gamma = recovery_threshold(k)
    if not 1 <= s <= n:
        raise ValueError("need 1 <= s <= n")
    rng = np.random.default_rng(seed)
    z = np.zeros(trials, dtype=np.int64)
    hit_at = np.zeros(trials, dtype=np.int64)
    active = np.ones(trials, dtype=bool)
    c = 0
    cap = 200 * (n // s + 1) + 10_000
    while active.any():
        c += 1
        if c > cap:
            raise ArithmeticError("hitting-time simulation exceeded its cap")
        za = z[active]
        z[active] = za + rng.hypergeometric(n - za, za, s)
        reached = active & (z >= gamma)
        hit_at[reached] = c
        active &= ~reached
    hit_at.sort()
    rank = math.ceil(target * trials) - 1
    return int(hit_at[min(rank, trials - 1)])


# --- enhanced-model denial probability -------------------------------------------


def _check_px_params(s: int, c: int, d: int) -> None:
    if s < 1 or c < 1:
        raise ValueError("s and c must be positive")
    if not 0 <= d <= c * s:
        raise ValueError("d must be in 0..c*s")


def px(s: int, c: int, d: int) -> float:
    """Probability a client sees >= 1 of its s requests among d denied ones."""
    _check_px_params(s, c, d)
    total = math.comb(c * s, d)
    others = s * (c - 1)
    acc = Fraction(0)
    for i in range(1, min(s, d) + 1):
        acc += Fraction(math.comb(s, i) * math.comb(others, d - i), total)
    return float(acc)


def px_complement(s: int, c: int, d: int) -> float:
    """Same probability as 1 - C(s(c-1), d)/C(cs, d)."""
    _check_px_params(s, c, d)
    return float(1 - Fraction(math.comb(s * (c - 1), d), math.comb(c * s, d)))


def mc_px(s: int, c: int, d: int, trials: int = 100_000, seed: int = 0) -> float:
    """Monte Carlo: deny d uniformly random requests of c*s, watch one client."""
    _check_px_params(s, c, d)
    rng = np.random.default_rng(seed)
    hits = rng.hypergeometric(s, s * (c - 1), d, size=trials)
    return float(np.mean(hits > 0))


# --- Monte Carlo for p1 and pc ----------------------------------------------------


def sample_distinct(rng: np.random.Generator, n: int, s: int, trials: int) -> np.ndarray:
    """(trials, s) matrix of uniform draws without replacement per row."""
    if not 0 <= s <= n:
        raise ValueError("need 0 <= s <= n")
    if s == 0:
        return np.empty((trials, 0), dtype=np.int64)
    draws = rng.integers(0, n, size=(trials, s))
    for _ in range(64):
        ordered = np.sort(draws, axis=1)
        dup = (np.diff(ordered, axis=1) == 0).any(axis=1)
        if not dup.any():
            return draws
        draws[dup] = rng.integers(0, n, size=(int(dup.sum()), s))
    # dense regime: draw by shuffling explicit index rows
    bad = np.nonzero(dup)[0]
    for row in bad:
        draws[row] = rng.permutation(n)[:s]
    return draws


def mc_p1(
    k: int, s: int, q: Optional[int] = None, trials: int = 100_000, seed: int = 0
) -> float:
    """Monte Carlo p1: which trials touch the q withheld cells (the first q,
    by symmetry of uniform sampling)."""
    n = (2 * k) ** 2
    if q is None:
        q = unavailable_minimum(k)
    if not 0 <= q <= n or not 0 <= s <= n:
        raise ValueError("parameters out of range")
    rng = np.random.default_rng(seed)
    draws = sample_distinct(rng, n, s, trials)
    return float(np.mean((draws < q).any(axis=1)))


def mc_pc(
    k: int,
    s: int,
    c: int,
    c_hat: int,
    q: Optional[int] = None,
    trials: int = 100_000,
    seed: int = 0,
) -> float:
    """Monte Carlo pc: binomial draws of per-client successes at rate p1."""
    if not 0 <= c_hat <= c:
        raise ValueError("c_hat must be in 0..c")
    hit = p1(k, s, q)
    rng = np.random.default_rng(seed)
    successes = rng.binomial(c, hit, size=trials)
    return float(np.mean(successes > c_hat))
