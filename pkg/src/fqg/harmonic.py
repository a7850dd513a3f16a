"""Numerical verifiers for the Schatten, rapid-decay and weak-L_p estimates.

Operator norms for q != 2 are randomized lower bounds (alternating duality
iterations from random starts); every report labels the direction of its
bounds.  Universally quantified statements (membership for every r < 1) are
decided analytically by threshold comparison, never by sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import algebra as alg
from .algebra import BlockElement, CentralElement, TruncatedRegularRep
from .chebyshev import (chebyshev_dim, fusion_range, log_chebyshev_dim,
                        threshold)
from .intertwiners import IntertwinerContext

SCHATTEN_PASS_TOL = 1e-10


# ---------------------------------------------------------------------------
# Schatten bilinear contraction
# ---------------------------------------------------------------------------

def schatten_q_norm(M: np.ndarray, q: float) -> float:
    s = np.linalg.svd(M, compute_uv=False)
    if q == math.inf:
        return float(s[0]) if s.size else 0.0
    return float(np.sum(s ** q) ** (1.0 / q))


def partial_contraction(x: np.ndarray, y: np.ndarray, dh: int, d: int,
                        dk: int) -> np.ndarray:
    """sum_ij x_ij (x) y_ij for x on H (x) l2(d) and y on l2(d) (x) K."""
    x4 = x.reshape(dh, d, dh, d)
    y4 = y.reshape(d, dk, d, dk)
    out = np.einsum("aibj,icjd->acbd", x4, y4, optimize=True)
    return out.reshape(dh * dk, dh * dk)


@dataclass
class SchattenTrialReport:
    dims: tuple[int, int, int]
    q: float
    trials: int
    seed: int
    max_ratio: float
    pass_tol: float = SCHATTEN_PASS_TOL

    @property
    def ok(self) -> bool:
        return self.max_ratio <= 1.0 + self.pass_tol


def schatten_contraction_trial(dims: tuple[int, int, int], q: float,
                               trials: int, seed: int) -> SchattenTrialReport:
    """max over Gaussian draws of ||sum_ij x_ij (x) y_ij||_q / (||x||_q ||y||_q).

    Asserted for 1 <= q <= 2 only; larger q is rejected rather than guessed.
    """
    if not (1.0 <= q <= 2.0):
        raise ValueError(
            f"contraction inequality is only asserted for 1 <= q <= 2, got {q}")
    dh, d, dk = dims
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal((dh * d, dh * d)) \
            + 1j * rng.standard_normal((dh * d, dh * d))
        y = rng.standard_normal((d * dk, d * dk)) \
            + 1j * rng.standard_normal((d * dk, d * dk))
        num = schatten_q_norm(partial_contraction(x, y, dh, d, dk), q)
        den = schatten_q_norm(x, q) * schatten_q_norm(y, q)
        worst = max(worst, num / den)
    return SchattenTrialReport(dims=dims, q=q, trials=trials, seed=seed,
                               max_ratio=worst)


# ---------------------------------------------------------------------------
# local rapid-decay scan
# ---------------------------------------------------------------------------

def _dual_exponent_map(M: np.ndarray, e: float) -> np.ndarray:
    """U diag(s^(e-1)) V^H; for e = inf the top singular dyad."""
    U, s, Vh = np.linalg.svd(M)
    if e == math.inf:
        return np.outer(U[:, 0], Vh[0, :])
    floor = s.max() * 1e-13 if s.size and s.max() > 0 else 0.0
    se = np.where(s > floor, s ** (e - 1.0), 0.0)
    return (U * se) @ Vh


def _weighted_q(M: np.ndarray, w: float, q: float) -> float:
    s = np.linalg.svd(M, compute_uv=False)
    return float((w * np.sum(s ** q)) ** (1.0 / q))


def _cell_ratio(ctx: IntertwinerContext, n: int, k: int, l: int, q: float,
                trials: int, rng: np.random.Generator, refine: int = 5) -> float:
    """Lower bound for sup ||p_l(x*y)||_q / (||x||_q ||y||_q) over one cell.

    Alternating ascent: each half-step replaces one factor by the duality
    image of the gradient against a norming functional of the output.
    """
    N = ctx.N
    dn, dk, dl = ctx.dim(n), ctx.dim(k), ctx.dim(l)
    V3 = ctx.fusion_isometry(n, k, l).reshape(dn, dk, dl)
    coeff = dn * dk / dl

    def forward(x, y):
        T = np.tensordot(x, V3, axes=([1], [0]))          # (dn, dk, dl)
        T = np.tensordot(y, T, axes=([1], [1]))           # (dk, dn, dl)
        return coeff * np.tensordot(V3.conj(), T, axes=([0, 1], [1, 0]))

    def grad_x(zs, y):
        # d/d conj(x) of <Z*, p_l(x*y)>: conj-linear part contracted
        A = np.tensordot(V3, zs, axes=([2], [0]))         # (a1, b1, l2)
        B = np.tensordot(A, V3.conj(), axes=([2], [2]))   # (a1, b1, a2, b2)
        return np.einsum("aBcD,BD->ac", B, y.conj(), optimize=True)

    def grad_y(zs, x):
        A = np.tensordot(V3, zs, axes=([2], [0]))         # (a1, b1, l2)
        D = np.tensordot(x.conj(), V3.conj(), axes=([1], [0]))  # (a1, b2, l2)
        return np.einsum("abl,aBl->bB", A, D, optimize=True)

    qp = q / (q - 1.0) if q > 1.0 else math.inf
    best = 0.0
    for _ in range(trials):
        x = rng.standard_normal((dn, dn)) + 1j * rng.standard_normal((dn, dn))
        y = rng.standard_normal((dk, dk)) + 1j * rng.standard_normal((dk, dk))
        x /= _weighted_q(x, dn, q)
        y /= _weighted_q(y, dk, q)
        for _ in range(refine):
            z = forward(x, y)
            best = max(best, _weighted_q(z, dl, q))
            zs = _dual_exponent_map(z, q)
            x = _dual_exponent_map(grad_x(zs, y), qp)
            nx = _weighted_q(x, dn, q)
            if nx == 0:
                break
            x /= nx
            z = forward(x, y)
            best = max(best, _weighted_q(z, dl, q))
            zs = _dual_exponent_map(z, q)
            y = _dual_exponent_map(grad_y(zs, x), qp)
            ny = _weighted_q(y, dk, q)
            if ny == 0:
                break
            y /= ny
        z = forward(x, y)
        best = max(best, _weighted_q(z, dl, q))
    return best


@dataclass
class RDReport:
    q: float
    max_level: int
    trials: int
    seed: int
    cells: dict[tuple[int, int, int], float]
    empirical_local_constant: float

    def argmax_cell(self):
        return max(self.cells, key=self.cells.get)


def local_rd_scan(ctx: IntertwinerContext, q: float, max_level: int,
                  trials: int = 20, seed: int = 0) -> RDReport:
    """Per-cell lower bounds for the block convolution ratio; their maximum is
    the empirical local rapid-decay constant."""
    rng = np.random.default_rng(seed)
    cells = {}
    for n in range(max_level + 1):
        for k in range(max_level + 1):
            for l in fusion_range(n, k):
                if n == 0 or k == 0:
                    cells[(n, k, l)] = 1.0
                    continue
                cells[(n, k, l)] = _cell_ratio(ctx, n, k, l, q, trials, rng)
    const = max(cells.values())
    return RDReport(q=q, max_level=max_level, trials=trials, seed=seed,
                    cells=cells, empirical_local_constant=const)


# ---------------------------------------------------------------------------
# global rapid decay on truncations
# ---------------------------------------------------------------------------

@dataclass
class GlobalRDReport:
    n: int
    q: float
    K: int
    trials: int
    seed: int
    ratios: list[float]
    ratio: float           # worst (largest) over trials; a lower bound


def global_rd_estimate(ctx: IntertwinerContext, n: int, q: float, K: int,
                       trials: int = 3, seed: int = 0) -> GlobalRDReport:
    """Lower bound of ||x * .||_{q->q} / ((n+1) ||x||_q) for random level-n x.

    q = 2 uses power iteration on the bias-free window of the truncated left
    regular representation; other q use random draws plus duality ascent.
    """
    rng = np.random.default_rng(seed)
    ratios = []
    for trial in range(trials):
        x = alg.random_element(ctx.N, [n], rng)
        xq = alg.lq_norm(x, q)
        rep = TruncatedRegularRep(x, K, ctx)
        if q == 2.0:
            est = rep.operator_norm_lower(iters=30, seed=seed + 101 * trial)
        else:
            est = _global_q_lower(ctx, x, q, K, rng)
        ratios.append(est / ((n + 1) * xq))
    return GlobalRDReport(n=n, q=q, K=K, trials=trials, seed=seed,
                          ratios=ratios, ratio=max(ratios))


def _global_q_lower(ctx: IntertwinerContext, x: BlockElement, q: float,
                    K: int, rng: np.random.Generator, starts: int = 4,
                    refine: int = 4) -> float:
    """Randomized lower bound of ||y -> x*y||_{q->q} on the window domain."""
    n0 = x.max_level()
    inner = list(range(max(0, K - n0) + 1))
    best = 0.0
    qp = q / (q - 1.0) if q > 1.0 else math.inf
    for _ in range(starts):
        y = alg.random_element(ctx.N, inner, rng)
        y = (1.0 / alg.lq_norm(y, q)) * y
        for _ in range(refine):
            z = alg.convolve(x, y, ctx, max_level=K + n0)
            best = max(best, alg.lq_norm(z, q))
            # push back through the sharp adjoint against a norming element
            zdual = BlockElement({l: _dual_exponent_map(M, q)
                                  for l, M in z.blocks.items()}, ctx.N)
            w = alg.convolve(alg.sharp(x, ctx), zdual, ctx, max_level=K + 2 * n0)
            wb = {l: _dual_exponent_map(M, qp) if qp != math.inf else M
                  for l, M in w.blocks.items() if l in inner}
            y = BlockElement(wb, ctx.N)
            ny = alg.lq_norm(y, q)
            if ny == 0:
                break
            y = (1.0 / ny) * y
        z = alg.convolve(x, y, ctx, max_level=K + n0)
        best = max(best, alg.lq_norm(z, q))
    return best


# ---------------------------------------------------------------------------
# operator-norm bounds for the L_p completions
# ---------------------------------------------------------------------------

def cstar_upper_bound(x: BlockElement, p: float, d_constant: float) -> float:
    """d_constant * (n(x)+1)^(1+1/p) * ||x||_q with q conjugate to p."""
    if not x.blocks:
        raise ValueError("zero element has no completion-norm bound")
    if p < 2:
        raise ValueError(f"need p >= 2, got {p}")
    q = p / (p - 1.0)
    nx = x.max_level()
    return d_constant * (nx + 1) ** (1.0 + 1.0 / p) * alg.lq_norm(x, q)


@dataclass
class PowerSequenceReport:
    p: float
    q: float
    a: list[float]                # a_k = ||(x^# * x)^{*2k}||_q^{1/4k}
    k_values: list[int]
    partial: bool
    level_budget: int

    @property
    def bound(self) -> float:
        return min(self.a) if self.a else math.inf


def cstar_power_sequence(x: BlockElement, p: float, k_max: int,
                         ctx: IntertwinerContext,
                         level_budget: int | None = None) -> PowerSequenceReport:
    """Exact convolution powers a_k = ||(x^# * x)^(*2k)||_q^(1/(4k)).

    No truncation: the run stops (flagged partial) when supports would pass
    the level budget.
    """
    if p < 2:
        raise ValueError(f"need p >= 2, got {p}")
    q = p / (p - 1.0)
    if level_budget is None:
        level_budget = ctx.chain_max_level()
    w = alg.convolve(alg.sharp(x, ctx), x, ctx, max_level=level_budget)
    u = None
    a, ks = [], []
    partial = False
    for k in range(1, k_max + 1):
        target_support = 2 * k * w.max_level()
        if target_support > level_budget:
            partial = True
            break
        if u is None:
            u = alg.convolve(w, w, ctx, max_level=level_budget)      # w^{*2}
        else:
            u = alg.convolve(alg.convolve(u, w, ctx, max_level=level_budget),
                             w, ctx, max_level=level_budget)
        a.append(alg.lq_norm(u, q) ** (1.0 / (4.0 * k)))
        ks.append(k)
    return PowerSequenceReport(p=p, q=q, a=a, k_values=ks, partial=partial,
                               level_budget=level_budget)


# ---------------------------------------------------------------------------
# weak L_p classification
# ---------------------------------------------------------------------------

@dataclass
class WeakLpVerdict:
    p: float
    family: str
    parameter: float
    decay_rate: float
    threshold: float
    item2_sup: float
    item2_finite: bool
    item3_norm: float
    item3_finite: bool
    item4_all_r: bool
    verdict: str                   # WeaklyLp | NotWeaklyLp
    coherent: bool


def _profile_decay_rate(family: CentralElement, parameter: float) -> float:
    """Exponential decay rate of the profile (both closed-form families decay
    like parameter^n up to two-sided constants)."""
    if family.kind in ("poisson", "semigroup"):
        return parameter
    raise ValueError(f"no closed-form decay for family kind {family.kind!r}")


def weak_lp_classify(family: CentralElement, parameter: float, p: float,
                     n_max: int = 200, N: int | None = None) -> WeakLpVerdict:
    """Evaluate the three computable membership criteria for a central family.

    item 2: sup_n (n+1)^{-1} ||p_n phi||_p             (numerical sup + tail flag)
    item 3: ||(1+l)^{-1-2/p} phi||_p                   (log-space partial sums)
    item 4: r^l phi in L_p for every r < 1             (analytic threshold test)
    """
    if p < 2:
        raise ValueError(f"need p >= 2, got {p}")
    N = N if N is not None else family.N
    thr = threshold(p, N)
    rate = _profile_decay_rate(family, parameter)

    # item 2: log terms log|c_n| + (2/p) log d_n - log(n+1)
    logs2 = []
    for n in range(n_max + 1):
        c = family.value(n)
        if c <= 0:
            continue
        logs2.append(math.log(c) + (2.0 / p) * log_chebyshev_dim(n, N)
                     - math.log(n + 1.0))
    item2_sup = math.exp(max(logs2)) if logs2 else 0.0
    tail_increasing = len(logs2) > 10 and logs2[-1] > logs2[-6] > logs2[-11]
    item2_finite = not tail_increasing

    # item 3: sum (1+n)^{-p-2} c_n^p d_n^2 in log space
    acc = -math.inf
    last_term = -math.inf
    prev_term = -math.inf
    for n in range(n_max + 1):
        c = family.value(n)
        if c <= 0:
            continue
        t = (-(p + 2.0)) * math.log(n + 1.0) + p * math.log(c) \
            + 2.0 * log_chebyshev_dim(n, N)
        m = max(acc, t)
        acc = m + math.log(math.exp(acc - m) + math.exp(t - m))
        prev_term, last_term = last_term, t
    item3_finite = last_term <= prev_term or last_term < acc - 30.0
    item3_norm = math.exp(acc / p) if acc > -math.inf else 0.0

    # item 4 analytically: rate <= threshold makes (r * rate) subcritical
    # for every r < 1
    item4 = rate <= thr + 1e-12

    verdict = "WeaklyLp" if item4 else "NotWeaklyLp"
    coherent = (item2_finite == item4) and (item3_finite == item4)
    return WeakLpVerdict(p=p, family=family.kind, parameter=parameter,
                         decay_rate=rate, threshold=thr,
                         item2_sup=item2_sup, item2_finite=item2_finite,
                         item3_norm=item3_norm, item3_finite=item3_finite,
                         item4_all_r=item4, verdict=verdict, coherent=coherent)


@dataclass
class ExoticWindowReport:
    p: float
    p_prime: float
    N: int
    lower_threshold: float
    upper_threshold: float
    r0: float
    verdict_p: str
    verdict_p_prime: str
    separating: bool

    @property
    def conclusion(self) -> str:
        if self.separating:
            return (f"the completion quotient from exponent {self.p_prime:g} "
                    f"onto exponent {self.p:g} is not injective")
        return "window failed to separate the two completions"


def exotic_window_demo(p: float, p_prime: float, N: int,
                       n_max: int = 200) -> ExoticWindowReport:
    """Pick the midpoint of (threshold(p), threshold(p')) and verify the
    positive-definite family value there is weakly L_{p'} but not weakly L_p."""
    if not (2 <= p < p_prime):
        raise ValueError(f"need 2 <= p < p', got ({p}, {p_prime})")
    lo, hi = threshold(p, N), threshold(p_prime, N)
    r0 = 0.5 * (lo + hi)
    fam = alg.central_family("poisson", r0, n_max, N)
    v_low = weak_lp_classify(fam, r0, p, n_max=n_max, N=N)
    v_high = weak_lp_classify(fam, r0, p_prime, n_max=n_max, N=N)
    separating = (v_high.verdict == "WeaklyLp" and v_low.verdict == "NotWeaklyLp")
    return ExoticWindowReport(p=p, p_prime=p_prime, N=N, lower_threshold=lo,
                              upper_threshold=hi, r0=r0,
                              verdict_p=v_low.verdict,
                              verdict_p_prime=v_high.verdict,
                              separating=separating)


# ---------------------------------------------------------------------------
# positive definiteness Gram tests
# ---------------------------------------------------------------------------

@dataclass
class GramTestReport:
    family_size: int
    min_eigenvalue: float
    gram_norm: float
    tolerance: float
    hermiticity_defect: float

    @property
    def ok(self) -> bool:
        return self.min_eigenvalue >= -self.tolerance


def pd_gram_test(phi, family: list[BlockElement], ctx: IntertwinerContext,
                 rel_tol: float = 1e-8) -> GramTestReport:
    """Gram matrix G[i,j] = h(phi * (x_i^# conv x_j)); positive semidefinite
    exactly when phi pairs positively with every omega^# * omega."""
    phi_block = phi.to_block() if isinstance(phi, CentralElement) else phi
    m = len(family)
    G = np.zeros((m, m), dtype=np.complex128)
    sharps = [alg.sharp(x, ctx) for x in family]
    budget = ctx.chain_max_level()
    for i in range(m):
        for j in range(m):
            z = alg.convolve(sharps[i], family[j], ctx, max_level=budget)
            G[i, j] = alg.haar_product(phi_block, z)
    herm = float(np.linalg.norm(G - G.conj().T))
    Gh = 0.5 * (G + G.conj().T)
    w = np.linalg.eigvalsh(Gh)
    gnorm = float(np.max(np.abs(w))) if m else 0.0
    tol = rel_tol * max(gnorm, 1e-300)
    return GramTestReport(family_size=m, min_eigenvalue=float(w.min()) if m else 0.0,
                          gram_norm=gnorm, tolerance=tol,
                          hermiticity_defect=herm)
