"""The convolution algebra of finitely supported block elements.

An element is a finite map level -> matrix (coordinates with respect to the
level bases of an IntertwinerContext).  The dimension-weighted trace
h(x) = sum_n d_n Tr(x_n) plays the role of the Haar weight; L_q norms are the
correspondingly weighted Schatten norms.  The convolution product acts
blockwise through the fusion isometries,

    component at l of (x * y) = (d_n d_k / d_l) V^H (x_n (x) y_k) V,

summed over levels l in the fusion range of the supporting pairs (n, k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chebyshev import chebyshev_dim, fusion_range
from .intertwiners import IntertwinerContext

CANON_TOL = 1e-14


class TruncationError(RuntimeError):
    """A convolution would produce levels beyond the allowed maximum."""


@dataclass
class BlockElement:
    """Finitely supported element: {level: d_n x d_n complex matrix}."""

    blocks: dict[int, np.ndarray]
    N: int

    def __post_init__(self):
        clean = {}
        for n, M in self.blocks.items():
            M = np.asarray(M, dtype=np.complex128)
            d = chebyshev_dim(n, self.N)
            if M.shape != (d, d):
                raise ValueError(f"block at level {n} must be {d}x{d}, got {M.shape}")
            if np.linalg.norm(M) > CANON_TOL:
                clean[int(n)] = M
        self.blocks = clean

    # -- structure -------------------------------------------------------
    def levels(self) -> list[int]:
        return sorted(self.blocks)

    def max_level(self) -> int:
        return max(self.blocks, default=-1)

    def block(self, n: int) -> np.ndarray:
        d = chebyshev_dim(n, self.N)
        return self.blocks.get(n, np.zeros((d, d), dtype=np.complex128))

    def copy(self) -> "BlockElement":
        return BlockElement({n: M.copy() for n, M in self.blocks.items()}, self.N)

    # -- linear operations -------------------------------------------------
    def __add__(self, other: "BlockElement") -> "BlockElement":
        out = {n: M.copy() for n, M in self.blocks.items()}
        for n, M in other.blocks.items():
            out[n] = out.get(n, 0) + M
        return BlockElement(out, self.N)

    def __sub__(self, other: "BlockElement") -> "BlockElement":
        return self + (-1.0) * other

    def __rmul__(self, scalar) -> "BlockElement":
        return BlockElement({n: scalar * M for n, M in self.blocks.items()}, self.N)

    def adjoint(self) -> "BlockElement":
        return BlockElement({n: M.conj().T for n, M in self.blocks.items()}, self.N)

    def norm_frobenius(self) -> float:
        return math.sqrt(sum(float(np.linalg.norm(M)) ** 2
                             for M in self.blocks.values()))


def unit(N: int) -> BlockElement:
    """The convolution unit: the level-0 minimal central projection."""
    return BlockElement({0: np.ones((1, 1))}, N)


def central_projection(n: int, N: int) -> BlockElement:
    """p_n: identity matrix at level n."""
    return BlockElement({n: np.eye(chebyshev_dim(n, N))}, N)


def matrix_unit(n: int, i: int, j: int, N: int) -> BlockElement:
    d = chebyshev_dim(n, N)
    M = np.zeros((d, d), dtype=np.complex128)
    M[i, j] = 1.0
    return BlockElement({n: M}, N)


def random_element(N: int, levels, rng: np.random.Generator,
                   hermitian: bool = False) -> BlockElement:
    """Standard complex Gaussian blocks on the given levels."""
    blocks = {}
    for n in levels:
        d = chebyshev_dim(n, N)
        M = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        if hermitian:
            M = 0.5 * (M + M.conj().T)
        blocks[n] = M
    return BlockElement(blocks, N)


# ---------------------------------------------------------------------------
# Haar functional and norms
# ---------------------------------------------------------------------------

def haar(x: BlockElement) -> complex:
    """h(x) = sum_n d_n Tr(x_n); doubles as the counit pairing of omega_x."""
    return sum(chebyshev_dim(n, x.N) * complex(np.trace(M))
               for n, M in x.blocks.items()) or 0j


def haar_product(a: BlockElement, x: BlockElement) -> complex:
    """h(a x) for the pointwise (blockwise) operator product."""
    acc = 0j
    for n, M in x.blocks.items():
        if n in a.blocks:
            acc += chebyshev_dim(n, x.N) * complex(np.trace(a.blocks[n] @ M))
    return acc


def singular_values(M: np.ndarray) -> np.ndarray:
    """Singular values via the Hermitian eigenproblem of M^H M, floored at 0."""
    w = np.linalg.eigvalsh(M.conj().T @ M)
    return np.sqrt(np.clip(w, 0.0, None))


def lq_norm(x: BlockElement, q: float) -> float:
    """||x||_q = (sum_n d_n sum_i sigma_i(x_n)^q)^(1/q); q = inf gives sup of
    block operator norms."""
    if not x.blocks:
        return 0.0
    if q == math.inf:
        return max(float(singular_values(M).max()) for M in x.blocks.values())
    if q < 1:
        raise ValueError(f"need q >= 1, got {q}")
    acc = 0.0
    for n, M in x.blocks.items():
        s = singular_values(M)
        acc += chebyshev_dim(n, x.N) * float(np.sum(s ** q))
    return acc ** (1.0 / q)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _sandwich(V: np.ndarray, xn: np.ndarray, yk: np.ndarray,
              dn: int, dk: int) -> np.ndarray:
    """V^H (x (x) y) V without materializing the Kronecker product."""
    dl = V.shape[1]
    V3 = V.reshape(dn, dk, dl)
    T = np.tensordot(xn, V3, axes=([1], [0]))          # (dn, dk, dl)
    T = np.tensordot(yk, T, axes=([1], [1]))           # (dk, dn, dl)
    return np.tensordot(V3.conj(), T, axes=([0, 1], [1, 0]))   # (dl, dl)


def convolve(x: BlockElement, y: BlockElement, ctx: IntertwinerContext,
             max_level: int | None = None) -> BlockElement:
    """Convolution product x * y.

    Refuses to truncate: if a fusion product exceeds `max_level` (default:
    the context's ambient ceiling) a TruncationError is raised.
    """
    N = ctx.N
    if max_level is None:
        max_level = ctx.chain_max_level()
    out: dict[int, np.ndarray] = {}
    for n, xn in x.blocks.items():
        dn = chebyshev_dim(n, N)
        for k, yk in y.blocks.items():
            dk = chebyshev_dim(k, N)
            if n + k > max_level:
                raise TruncationError(
                    f"convolution reaches level {n + k} > max level {max_level}")
            for l in fusion_range(n, k):
                V = ctx.fusion_isometry(n, k, l)
                dl = chebyshev_dim(l, N)
                contrib = (dn * dk / dl) * _sandwich(V, xn, yk, dn, dk)
                out[l] = out.get(l, 0) + contrib
    return BlockElement(out, N)


def convolve_pairing(x: BlockElement, y: BlockElement, a: BlockElement,
                     ctx: IntertwinerContext) -> complex:
    """<omega_x * omega_y, a> evaluated through the coproduct formula.

    Independent of convolve(): uses sum_l d_n d_k Tr[(a_l) V^H (x (x) y) V]
    and never forms the product element.
    """
    N = ctx.N
    acc = 0j
    for n, xn in x.blocks.items():
        dn = chebyshev_dim(n, N)
        for k, yk in y.blocks.items():
            dk = chebyshev_dim(k, N)
            for l in fusion_range(n, k):
                if l not in a.blocks:
                    continue
                V = ctx.fusion_isometry(n, k, l)
                S = _sandwich(V, xn, yk, dn, dk)
                acc += dn * dk * complex(np.trace(a.blocks[l] @ S))
    return acc


# ---------------------------------------------------------------------------
# antipode and involution
# ---------------------------------------------------------------------------

def antipode(x: BlockElement, ctx: IntertwinerContext) -> BlockElement:
    """S(x): blockwise J_n x_n^T J_n^H; involutive in the unimodular case."""
    out = {}
    for n, M in x.blocks.items():
        J = ctx.conjugation(n)
        out[n] = J @ M.T @ J.conj().T
    return BlockElement(out, x.N)


def sharp(x: BlockElement, ctx: IntertwinerContext) -> BlockElement:
    """x^# = S(x^*): the involution carried by the functional picture."""
    out = {}
    for n, M in x.blocks.items():
        J = ctx.conjugation(n)
        out[n] = J @ M.conj() @ J.conj().T
    return BlockElement(out, x.N)


# ---------------------------------------------------------------------------
# central families
# ---------------------------------------------------------------------------

@dataclass
class CentralElement:
    """Element sum_n c_n 1_{level n}, stored as the scalar profile c."""

    profile: dict[int, float]
    N: int
    kind: str = "custom"

    def to_block(self, n_max: int | None = None) -> BlockElement:
        ns = [n for n in self.profile if n_max is None or n <= n_max]
        return BlockElement(
            {n: self.profile[n] * np.eye(chebyshev_dim(n, self.N)) for n in ns},
            self.N)

    def value(self, n: int) -> float:
        return self.profile.get(n, 0.0)


def central_family(kind: str, parameter: float, n_max: int, N: int) -> CentralElement:
    """Distinguished central families.

    kind = 'poisson':      c_n = S_n(rN)/S_n(N)   (positive definite family)
    kind = 'semigroup':    c_n = r^n
    kind = 'length_weight': c_n = (1+n)^(-1-2/p)  (parameter is p)
    """
    from .chebyshev import poisson_profile_value
    prof: dict[int, float] = {}
    for n in range(n_max + 1):
        if kind == "poisson":
            prof[n] = poisson_profile_value(n, parameter, N)
        elif kind == "semigroup":
            prof[n] = parameter ** n
        elif kind == "length_weight":
            prof[n] = (1.0 + n) ** (-1.0 - 2.0 / parameter)
        else:
            raise ValueError(f"unknown central family {kind!r}")
    return CentralElement(prof, N, kind=kind)


# ---------------------------------------------------------------------------
# coefficients of the regular representation
# ---------------------------------------------------------------------------

def regular_coefficient(x: BlockElement, y: BlockElement,
                        ctx: IntertwinerContext) -> BlockElement:
    """The coefficient element (iota (x) h)(Delta(y^*)(1 (x) x)).

    Satisfies regular_coefficient(unit, y.adjoint()) == y.
    """
    N = ctx.N
    ystar = y.adjoint()
    out: dict[int, np.ndarray] = {}
    for l, Yl in ystar.blocks.items():
        for k, Xk in x.blocks.items():
            dk = chebyshev_dim(k, N)
            for m in fusion_range(l, k):
                # l must sit inside m (x) k for Delta(p_l) to hit (p_m, p_k)
                dm = chebyshev_dim(m, N)
                V = ctx.fusion_isometry(m, k, l)
                V3 = V.reshape(dm, dk, chebyshev_dim(l, N))
                # d_k * PTr_k[ V Y V^H (1 (x) x_k) ]
                T1 = np.tensordot(Yl, V3.conj(), axes=([1], [2]))   # (l-in, m', k')
                T2 = np.tensordot(T1, Xk, axes=([2], [0]))          # (l-in, m', k)
                M = np.tensordot(V3, T2, axes=([1, 2], [2, 0]))     # (m, m')
                out[m] = out.get(m, 0) + dk * M
    return BlockElement(out, N)


# ---------------------------------------------------------------------------
# truncated regular representation
# ---------------------------------------------------------------------------

def _pack(blocks: dict[int, np.ndarray], levels: list[int], N: int) -> np.ndarray:
    segs = []
    for k in levels:
        d = chebyshev_dim(k, N)
        M = blocks.get(k)
        v = (M.reshape(-1) if M is not None
             else np.zeros(d * d, dtype=np.complex128))
        segs.append(math.sqrt(chebyshev_dim(k, N)) * v)
    return np.concatenate(segs) if segs else np.zeros(0, dtype=np.complex128)


def _unpack(vec: np.ndarray, levels: list[int], N: int) -> dict[int, np.ndarray]:
    out = {}
    pos = 0
    for k in levels:
        d = chebyshev_dim(k, N)
        out[k] = vec[pos:pos + d * d].reshape(d, d) / math.sqrt(chebyshev_dim(k, N))
        pos += d * d
    return out


class TruncatedRegularRep:
    """The operator y -> x * y on blocks of level <= K, in orthonormal
    coordinates where level k carries weight sqrt(d_k).

    Exposes matvec/rmatvec for iterative norm estimation, and a dense matrix
    for small truncations.  The sub-block with domain k <= K - n(x) is free of
    truncation bias and certifies lower bounds for the reduced norm.
    """

    def __init__(self, x: BlockElement, K: int, ctx: IntertwinerContext):
        self.x = x
        self.K = K
        self.ctx = ctx
        self.N = ctx.N
        n0 = x.max_level()
        if K + n0 > ctx.chain_max_level():
            raise TruncationError(
                f"truncation {K} + support {n0} exceeds max level "
                f"{ctx.chain_max_level()}")
        self.n0 = n0
        self.levels = list(range(K + 1))
        self.dim = sum(chebyshev_dim(k, self.N) ** 2 for k in self.levels)

    def apply_blocks(self, y: BlockElement) -> BlockElement:
        z = convolve(self.x, y, self.ctx, max_level=self.K + self.n0)
        return BlockElement({l: M for l, M in z.blocks.items() if l <= self.K},
                            self.N)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        y = BlockElement(_unpack(v, self.levels, self.N), self.N)
        z = self.apply_blocks(y)
        return _pack(z.blocks, self.levels, self.N)

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        xs = sharp(self.x, self.ctx)
        y = BlockElement(_unpack(v, self.levels, self.N), self.N)
        z = convolve(xs, y, self.ctx, max_level=self.K + self.n0)
        z = BlockElement({l: M for l, M in z.blocks.items() if l <= self.K}, self.N)
        return _pack(z.blocks, self.levels, self.N)

    def dense_matrix(self, max_dim: int = 4000) -> np.ndarray:
        if self.dim > max_dim:
            raise TruncationError(
                f"dense truncated representation has dimension {self.dim} > {max_dim}")
        cols = []
        for j in range(self.dim):
            e = np.zeros(self.dim, dtype=np.complex128)
            e[j] = 1.0
            cols.append(self.matvec(e))
        return np.stack(cols, axis=1)

    def operator_norm_lower(self, iters: int = 60, seed: int = 3) -> float:
        """Certified lower bound on the L2 -> L2 norm of the truncation,
        restricted to the bias-free domain k <= K - n(x)."""
        inner = [k for k in self.levels if k <= self.K - self.n0]
        rng = np.random.default_rng(seed)
        dim_in = sum(chebyshev_dim(k, self.N) ** 2 for k in inner)
        v = rng.standard_normal(dim_in) + 1j * rng.standard_normal(dim_in)
        v /= np.linalg.norm(v)
        best = 0.0
        for _ in range(iters):
            y = BlockElement(_unpack(v, inner, self.N), self.N)
            z = self.apply_blocks(y)
            w = _pack(z.blocks, self.levels, self.N)
            nz = np.linalg.norm(w)
            best = max(best, nz)
            # pull back through the adjoint to power-iterate T^H T
            zs = convolve(sharp(self.x, self.ctx),
                          BlockElement(_unpack(w, self.levels, self.N), self.N),
                          self.ctx, max_level=self.K + 2 * self.n0)
            zs = BlockElement({l: M for l, M in zs.blocks.items() if l in inner
                               or l <= max(inner, default=0)}, self.N)
            v = _pack(zs.blocks, inner, self.N)
            nv = np.linalg.norm(v)
            if nv == 0:
                break
            v /= nv
        return best
