"""Chebyshev dimension arithmetic, fusion index sets and series thresholds.

Block dimensions of the orthogonal family are the type-2 Chebyshev values
S_n(N) with S_0 = 1, S_1 = N, S_{n+1} = N S_n - S_{n-1}.  The growth rate is
rho > 1 with rho + 1/rho = N; the series sum_n r^{pn} S_n(N)^2 changes
behaviour at r = rho^(-2/p), which is the threshold behind every weak-L_p
classification in the workbench.

Dimensions are exact Python integers; a float variant in log-space is
provided for levels where squaring would overflow doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

DEFAULT_BOUNDARY_MARGIN = 1e-6


@lru_cache(maxsize=None)
def chebyshev_dim(n: int, N: int) -> int:
    """S_n(N), exact integer.  S_0 = 1, S_1 = N, S_{n+1} = N S_n - S_{n-1}."""
    if n < 0:
        raise ValueError(f"level must be >= 0, got {n}")
    if N < 2:
        raise ValueError(f"need N >= 2, got {N}")
    a, b = 1, N
    if n == 0:
        return a
    for _ in range(n - 1):
        a, b = b, N * b - a
    return b


def rho(N: int) -> float:
    """The growth rate rho > 1 with rho + 1/rho = N."""
    if N < 2:
        raise ValueError(f"need N >= 2, got {N}")
    return (N + math.sqrt(N * N - 4)) / 2.0


def chebyshev_dim_real(n: int, N: float) -> float:
    """S_n at real argument via the closed form (rho^{n+1}-rho^{-n-1})/(rho-1/rho).

    Works for any real N > 2; at N = 2 degenerates to n + 1.
    """
    if n < 0:
        raise ValueError(f"level must be >= 0, got {n}")
    if N == 2:
        return float(n + 1)
    if N < 2:
        raise ValueError(f"need N >= 2, got {N}")
    r = (N + math.sqrt(N * N - 4)) / 2.0
    return (r ** (n + 1) - r ** (-(n + 1))) / (r - 1.0 / r)


def log_chebyshev_dim(n: int, N: float) -> float:
    """log S_n(N) computed stably for large n (exact enough for tail ratios)."""
    if N <= 2:
        return math.log(chebyshev_dim_real(n, N))
    r = (N + math.sqrt(N * N - 4)) / 2.0
    # S_n = rho^n (1 - rho^{-2n-2}) / (1 - rho^{-2})
    return (
        n * math.log(r)
        + math.log1p(-(r ** (-2 * n - 2)))
        - math.log1p(-(r ** (-2)))
    )


def threshold(p: float, N: int) -> float:
    """rho(N)^(-2/p): convergence threshold of sum_n r^{pn} S_n(N)^2."""
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    if N < 3:
        raise ValueError(f"need N >= 3, got {N}")
    return rho(N) ** (-2.0 / p)


def fusion_range(n: int, k: int) -> list[int]:
    """Levels of the irreducible components of level-n tensor level-k.

    [|n-k|, |n-k|+2, ..., n+k] in steps of two.
    """
    if n < 0 or k < 0:
        raise ValueError("levels must be >= 0")
    return list(range(abs(n - k), n + k + 1, 2))


def in_fusion_range(l: int, n: int, k: int) -> bool:
    return abs(n - k) <= l <= n + k and (n + k - l) % 2 == 0


def dim_ratio_lhs(n: int, k: int, l: int, N: int) -> float:
    """The product (1/d_r) * prod_{s=1}^{r} d_s d_{n-r+s-1} d_{k-r+s-1} / (d_{l+s} d_{s-1}^2).

    Here r = (n+k-l)/2 counts the contracted strand pairs.  Empty product (r = 0)
    gives 1.  Exact rational evaluation, float return.
    """
    if not in_fusion_range(l, n, k):
        raise ValueError(f"level {l} not in fusion range of ({n}, {k})")
    r = (n + k - l) // 2
    d = lambda m: chebyshev_dim(m, N)
    acc = Fraction(1, d(r))
    for s in range(1, r + 1):
        acc *= Fraction(d(s) * d(n - r + s - 1) * d(k - r + s - 1),
                        d(l + s) * d(s - 1) ** 2)
    return float(acc)


def dim_ratio_normalized(n: int, k: int, l: int, N: int) -> float:
    """dim_ratio_lhs divided by (d_l / (d_n d_k))^(1/2)."""
    d = lambda m: chebyshev_dim(m, N)
    lhs = dim_ratio_lhs(n, k, l, N)
    return lhs / math.sqrt(d(l) / (d(n) * d(k)))


def empirical_dim_constant(max_level: int, N: int) -> float:
    """sup over n,k <= max_level, l in fusion range of the normalized dim ratio.

    The finite-grid surrogate for the dimension constant whose existence drives
    the block inequality; recorded as a regression value, not ground truth.
    """
    best = 0.0
    for n in range(max_level + 1):
        for k in range(max_level + 1):
            for l in fusion_range(n, k):
                best = max(best, dim_ratio_normalized(n, k, l, N))
    return best


@dataclass
class SeriesVerdict:
    """Outcome of classifying sum_n r^{pn} S_n(N)^2."""

    r: float
    p: float
    N: int
    threshold: float
    analytic: str                      # Converges | Diverges | Boundary
    empirical: str                     # from the tail ratio at n_max
    tail_ratio: float                  # r^p S_{n+1}^2 / S_n^2 at n = n_max
    log_partial_sums: list[float] = field(repr=False)

    @property
    def verdict(self) -> str:
        return self.analytic


def series_classify(r: float, p: float, N: int, n_max: int = 200,
                    margin: float = DEFAULT_BOUNDARY_MARGIN) -> SeriesVerdict:
    """Classify sum_n r^{pn} S_n(N)^2 analytically and by the empirical tail ratio.

    Analytic: compare r against rho^(-2/p); within `margin` of it the verdict
    is Boundary (the ratio test is silent there).  Empirical: the consecutive
    term ratio at n_max.  Partial sums are accumulated in log-space.
    """
    if not (0 < r < 1):
        raise ValueError(f"need 0 < r < 1, got {r}")
    if n_max < 50:
        raise ValueError(f"need n_max >= 50, got {n_max}")
    thr = threshold(p, N)
    if abs(r - thr) < margin:
        analytic = "Boundary"
    elif r < thr:
        analytic = "Converges"
    else:
        analytic = "Diverges"

    log_r = math.log(r)
    log_terms = [p * n * log_r + 2.0 * log_chebyshev_dim(n, N)
                 for n in range(n_max + 1)]
    log_sums = []
    acc = -math.inf
    for t in log_terms:
        m = max(acc, t)
        acc = m + math.log(math.exp(acc - m) + math.exp(t - m))
        log_sums.append(acc)

    tail_ratio = math.exp(p * log_r + 2.0 * (log_chebyshev_dim(n_max + 1, N)
                                             - log_chebyshev_dim(n_max, N)))
    if abs(tail_ratio - 1.0) < margin:
        empirical = "Boundary"
    elif tail_ratio < 1.0:
        empirical = "Converges"
    else:
        empirical = "Diverges"

    return SeriesVerdict(r=r, p=p, N=N, threshold=thr, analytic=analytic,
                         empirical=empirical, tail_ratio=tail_ratio,
                         log_partial_sums=log_sums)


def poisson_profile_value(n: int, r: float, N: int) -> float:
    """S_n(rN)/S_n(N): the decay profile of the positive-definite family."""
    if n == 0:
        return 1.0
    return math.exp(log_chebyshev_dim(n, r * N) - log_chebyshev_dim(n, N)) \
        if r * N > 2 else chebyshev_dim_real(n, r * N) / chebyshev_dim_real(n, N)


def poisson_profile_band(N: int, r_grid, n_max: int = 40):
    """Empirical constants (C1, C2) with C1 r^n <= S_n(rN)/S_n(N) <= C2 r^n.

    Scanned over the given r grid and n <= n_max; both are finite for
    r bounded away from 2/N.
    """
    c1 = math.inf
    c2 = 0.0
    for r in r_grid:
        for n in range(n_max + 1):
            q = poisson_profile_value(n, r, N) / r ** n
            c1 = min(c1, q)
            c2 = max(c2, q)
    return c1, c2
