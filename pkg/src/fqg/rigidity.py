"""The conjugation-by-generators map and the unique-trace iteration.

The map averages two-sided convolution by the level-1 matrix-unit
functionals,

    Phi(x) = (1/(2 N^3)) sum_ij [ e_ji * x * (e_ji)^#  +  (e_ji)^# * x * e_ji ].

Summing over all matrix units collapses each two-sided term to a rank-one
pattern across the outer legs, so Phi acts blockwise as

    Phi(x)_l = (d_n / (2 d_l)) sum_{paths n->m->l} [ Z^H x_n Z + Z'^H x_n Z' ]

with small matrices Z built from the fusion isometries V[m <- (n,1)] and
V[l <- (1,m)] contracted against the duality vector.  This is what makes the
operator tractable on truncations: no level-1 sum, no tensor products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from . import algebra as alg
from .algebra import BlockElement, TruncationError
from .chebyshev import chebyshev_dim
from .intertwiners import IntertwinerContext


def generator_sum(ctx: IntertwinerContext, order: str = "left") -> BlockElement:
    """(1/N^2) sum_ij e_ji * (e_ji)^# (or the reversed order).

    Equals N * unit when the generator functionals form a unitary matrix
    over the convolution algebra.
    """
    N = ctx.N
    acc = None
    for i in range(N):
        for j in range(N):
            e = alg.matrix_unit(1, j, i, N)
            es = alg.sharp(e, ctx)
            z = alg.convolve(e, es, ctx) if order == "left" else alg.convolve(es, e, ctx)
            acc = z if acc is None else acc + z
    return (1.0 / N ** 2) * acc


class ConjugationAverager:
    """Phi with precomputed Kraus factors per (source level, path)."""

    def __init__(self, ctx: IntertwinerContext, max_source_level: int):
        self.ctx = ctx
        self.N = ctx.N
        self.max_source_level = max_source_level
        self._kraus: dict[tuple[int, int, int], tuple[np.ndarray, np.ndarray]] = {}

    def _paths(self, n: int):
        for m in (n - 1, n + 1):
            if m < 0:
                continue
            for l in (m - 1, m + 1):
                if l >= 0:
                    yield m, l

    def kraus(self, n: int, m: int, l: int) -> tuple[np.ndarray, np.ndarray]:
        """Z and Z' (d_n x d_l) for the path n -> m -> l."""
        key = (n, m, l)
        if key in self._kraus:
            return self._kraus[key]
        ctx = self.ctx
        N = ctx.N
        dn, dm, dl = ctx.dim(n), ctx.dim(m), ctx.dim(l)
        Vn1 = ctx.fusion_isometry(n, 1, m).reshape(dn, N, dm)
        V1m = ctx.fusion_isometry(1, m, l).reshape(N, dm, dl)
        t2 = ctx.t2                      # t[(a,b)] = F[b,a]/sqrt(N)
        tp2 = ctx.params.F / math.sqrt(N)  # t'[(a,b)] = F[a,b]/sqrt(N)
        # Z[p,c] = sum_{a,b,alpha} conj(t[a,b]) Vn1[p,b,alpha] V1m[a,alpha,c]
        T = np.tensordot(t2.conj(), V1m, axes=([0], [0]))     # (b, alpha, c)
        Z = np.tensordot(Vn1, T, axes=([1, 2], [0, 1]))       # (p, c)
        Tp = np.tensordot(tp2.conj(), V1m, axes=([0], [0]))
        Zp = np.tensordot(Vn1, Tp, axes=([1, 2], [0, 1]))
        self._kraus[key] = (Z, Zp)
        return Z, Zp

    def apply(self, x: BlockElement, max_level: int | None = None,
              drop_level_zero: bool = False) -> BlockElement:
        """Phi(x); levels beyond max_level raise unless limited explicitly.

        With max_level set, output above it is discarded (absorbing
        truncation for norm estimates -- the caller opts in).
        """
        N = self.N
        truncate = max_level is not None
        budget = self.ctx.chain_max_level() - 1 if max_level is None else max_level
        out: dict[int, np.ndarray] = {}
        for n, xn in x.blocks.items():
            if n + 2 > budget and not truncate and n + 2 > self.ctx.chain_max_level() - 1:
                raise TruncationError(
                    f"Phi would reach level {n + 2} beyond budget {budget}")
            for m, l in self._paths(n):
                if truncate and l > budget:
                    continue
                if drop_level_zero and l == 0:
                    continue
                Z, Zp = self.kraus(n, m, l)
                coeff = chebyshev_dim(n, N) / (2.0 * chebyshev_dim(l, N))
                contrib = coeff * (Z.conj().T @ xn @ Z + Zp.conj().T @ xn @ Zp)
                out[l] = out.get(l, 0) + contrib
        return BlockElement(out, N)


def phi(x: BlockElement, ctx: IntertwinerContext,
        max_level: int | None = None) -> BlockElement:
    """The conjugation average Phi(x) (collapsed Kraus evaluation)."""
    return ConjugationAverager(ctx, x.max_level()).apply(x, max_level=max_level)


def phi_by_convolution(x: BlockElement, ctx: IntertwinerContext) -> BlockElement:
    """Oracle route: the literal double convolution, summed over matrix units."""
    N = ctx.N
    acc = None
    for i in range(N):
        for j in range(N):
            e = alg.matrix_unit(1, j, i, N)
            es = alg.sharp(e, ctx)
            z1 = alg.convolve(alg.convolve(e, x, ctx), es, ctx)
            z2 = alg.convolve(alg.convolve(es, x, ctx), e, ctx)
            term = z1 + z2
            acc = term if acc is None else acc + term
    return (1.0 / (2.0 * N ** 3)) * acc


def phi_l1_check(ctx: IntertwinerContext, trials: int = 20, seed: int = 0,
                 levels=(0, 1, 2, 3)) -> dict:
    """max ||Phi(x)||_1 / ||x||_1 over random draws; the unit is the sharp case."""
    rng = np.random.default_rng(seed)
    avg = ConjugationAverager(ctx, max(levels))
    worst = 0.0
    records = []
    for trial in range(trials):
        hermitian = trial % 2 == 0
        x = alg.random_element(ctx.N, levels, rng, hermitian=hermitian)
        ratio = alg.lq_norm(avg.apply(x), 1) / alg.lq_norm(x, 1)
        worst = max(worst, ratio)
        records.append(ratio)
    unit_ratio = alg.lq_norm(avg.apply(alg.unit(ctx.N)), 1)
    return {"max_ratio": worst, "unit_ratio": unit_ratio, "trials": trials,
            "seed": seed, "ratios": records}


# ---------------------------------------------------------------------------
# truncated norm on the trace-zero part of L2
# ---------------------------------------------------------------------------

def _pack(blocks, levels, N):
    segs = []
    for k in levels:
        d = chebyshev_dim(k, N)
        M = blocks.get(k)
        v = M.reshape(-1) if M is not None else np.zeros(d * d, dtype=np.complex128)
        segs.append(math.sqrt(chebyshev_dim(k, N)) * v)
    return np.concatenate(segs)


def _unpack(vec, levels, N):
    out = {}
    pos = 0
    for k in levels:
        d = chebyshev_dim(k, N)
        out[k] = vec[pos:pos + d * d].reshape(d, d) / math.sqrt(chebyshev_dim(k, N))
        pos += d * d
    return out


@dataclass
class L20NormReport:
    N: int
    K: int
    norm: float
    boundary_slack: float
    dim: int
    iterations: int


def phi_l20_norm(ctx: IntertwinerContext, K: int, tol: float = 1e-9,
                 seed: int = 5) -> L20NormReport:
    """Operator norm of the compression of Phi to blocks 1..K of L2.

    Exact matrix-free Lanczos on the self-adjoint compressed operator
    (absorbing boundary: output above K discarded).  The boundary slack
    reports the weight Phi pushes past the truncation at the extremal vector.
    """
    N = ctx.N
    if K + 1 > ctx.chain_max_level():
        raise TruncationError(
            f"phi_l20_norm at K={K} needs chain level {K + 1} "
            f"(max {ctx.chain_max_level()}); see budget")
    levels = list(range(1, K + 1))
    dim = sum(chebyshev_dim(k, N) ** 2 for k in levels)
    avg = ConjugationAverager(ctx, K)

    def matvec(v):
        x = BlockElement(_unpack(v, levels, N), N)
        y = avg.apply(x, max_level=K, drop_level_zero=True)
        return _pack(y.blocks, levels, N)

    op = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=matvec,
                                            dtype=np.complex128)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    if dim <= 4:
        M = np.stack([matvec(np.eye(dim, dtype=np.complex128)[:, j])
                      for j in range(dim)], axis=1)
        w = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
        norm = float(np.max(np.abs(w)))
        its = dim
    else:
        w = scipy.sparse.linalg.eigsh(op, k=1, which="LM", tol=tol, v0=v0,
                                      return_eigenvectors=False, maxiter=600)
        norm = float(abs(w[0]))
        its = -1
    # boundary slack at a random unit vector: mass pushed above K
    v = v0 / np.linalg.norm(v0)
    x = BlockElement(_unpack(v, levels, N), N)
    full = avg.apply(x, max_level=K + 2, drop_level_zero=True)
    slack = math.sqrt(sum(chebyshev_dim(l, N) * float(np.linalg.norm(M)) ** 2
                          for l, M in full.blocks.items() if l > K))
    return L20NormReport(N=N, K=K, norm=norm, boundary_slack=slack,
                         dim=dim, iterations=its)


def interpolated_bound(q: float, c_n: float) -> float:
    """C(q, N) = C_N^{2(1 - 1/q)}: interpolation of the L1 and L2 contractions."""
    if not (0 < c_n < 1):
        raise ValueError(f"need 0 < C_N < 1, got {c_n}")
    if not (1 < q <= 2):
        raise ValueError(f"need 1 < q <= 2, got {q}")
    return c_n ** (2.0 * (1.0 - 1.0 / q))


# ---------------------------------------------------------------------------
# iteration toward the Haar state
# ---------------------------------------------------------------------------

@dataclass
class IterationTrace:
    q: float
    p: float
    norms: list[float]
    upper_bounds: list[float]
    support_levels: list[int]
    fitted_rate: float | None
    k_max_requested: int
    k_max_run: int
    partial: bool
    d_constant: float
    level_budget: int


def iterate_to_haar(x: BlockElement, p: float, k_max: int,
                    ctx: IntertwinerContext, d_constant: float,
                    level_budget: int | None = None,
                    rate_fit_start: int = 3) -> IterationTrace:
    """Iterate Phi on x - <omega_x, p_0> p_0 and track L_q norms and the
    operator-norm upper bounds D (n(x)+2k+1)^(1+1/p) ||z_k||_q.

    Runs as many steps as the level budget admits (support grows by two per
    step); the trace is flagged partial when k_max cannot be reached.
    """
    if p < 2:
        raise ValueError(f"need p >= 2, got {p}")
    q = p / (p - 1.0)
    N = ctx.N
    if level_budget is None:
        level_budget = ctx.chain_max_level() - 1
    n0 = x.max_level()
    k_run = min(k_max, max(0, (level_budget - n0) // 2))
    x0 = complex(x.blocks.get(0, np.zeros((1, 1)))[0, 0])
    z = x - x0 * alg.unit(N)
    avg = ConjugationAverager(ctx, n0 + 2 * k_run)
    norms = [alg.lq_norm(z, q)]
    supports = [z.max_level()]
    bounds = [d_constant * (n0 + 1) ** (1.0 + 1.0 / p) * norms[0]]
    for k in range(1, k_run + 1):
        z = avg.apply(z)
        norms.append(alg.lq_norm(z, q))
        supports.append(z.max_level())
        bounds.append(d_constant * (n0 + 2 * k + 1) ** (1.0 + 1.0 / p) * norms[-1])
    rate = None
    ks = [k for k in range(rate_fit_start, k_run + 1) if norms[k] > 0]
    if len(ks) >= 2:
        logs = np.log([norms[k] for k in ks])
        slope = np.polyfit(ks, logs, 1)[0]
        rate = float(math.exp(slope))
    elif k_run >= 1 and norms[0] > 0:
        rate = float((norms[-1] / norms[0]) ** (1.0 / k_run))
    return IterationTrace(q=q, p=p, norms=norms, upper_bounds=bounds,
                          support_levels=supports, fitted_rate=rate,
                          k_max_requested=k_max, k_max_run=k_run,
                          partial=k_run < k_max, d_constant=d_constant,
                          level_budget=level_budget)
