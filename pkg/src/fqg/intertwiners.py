"""Representation-category data of the orthogonal family.

Constructs, for parameters (N, F):

  * the duality vector t with components t[(i,j)] = F[j,i]/sqrt(N),
  * Jones-Wenzl projections P_n on (C^N)^(x n) via the Wenzl recursion,
  * orthonormal level bases B_n with range(B_n) = range(P_n), built through a
    compressed chain W_n (coordinates of H_n inside H_{n-1} (x) H_1) so that
    levels beyond the ambient memory budget remain reachable,
  * fusion isometries V[l <- (n,k)] : H_l -> H_n (x) H_k, and
  * conjugation matrices J_n implementing the self-duality of each level.

All constructions are deterministic for fixed (N, F): basis columns and
isometry phases follow fixed sign conventions, so results are reproducible
across processes and cache round-trips.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from . import cache as fcache
from .chebyshev import chebyshev_dim, fusion_range, in_fusion_range
from .params import QGParams

ISO_TOL = 1e-10


class BudgetError(RuntimeError):
    """A construction would exceed the configured memory/level budget."""


class InvariantViolation(RuntimeError):
    """A certified invariant of a constructed object failed its tolerance."""


# ---------------------------------------------------------------------------
# deterministic sign conventions
# ---------------------------------------------------------------------------

def _phase_fix_columns(M: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    M = M.copy()
    idx = np.argmax(np.abs(M), axis=0)
    piv = M[idx, np.arange(M.shape[1])]
    phases = np.where(np.abs(piv) > 0, piv / np.maximum(np.abs(piv), 1e-300), 1.0)
    M /= phases[None, :]
    return M


def _phase_fix_global(M: np.ndarray) -> np.ndarray:
    """Rotate the whole matrix so column 0's largest entry is real positive."""
    col = M[:, 0]
    i = int(np.argmax(np.abs(col)))
    p = col[i]
    if np.abs(p) == 0:
        return M
    return M * (np.abs(p) / p)


def probe_operator_norm(apply_fn, dim: int, iters: int = 40, seed: int = 7) -> float:
    """Lower estimate of the operator norm of a Hermitian map by power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = apply_fn(v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        lam = nw
        v = w / nw
    return float(lam)


# ---------------------------------------------------------------------------
# elementary tensors
# ---------------------------------------------------------------------------

def invariant_vector(params: QGParams) -> np.ndarray:
    """Unit vector t = N^{-1/2} sum_i e_i (x) F e_i in C^(N^2)."""
    N = params.N
    return (params.F.T / np.sqrt(N)).reshape(N * N)


def zigzag_value(params: QGParams) -> complex:
    """The scalar c with (t^* (x) id)(id (x) t) = c * id; equals epsilon/N.

    Computed by contracting the actual tensors; raises if the result is not
    proportional to the identity (which would signal a broken t).
    """
    N = params.N
    t2 = invariant_vector(params).reshape(N, N)
    M = (t2.conj() @ t2).T        # M[j,a] = sum_i conj(t[(a,i)]) t[(i,j)]
    c = complex(np.trace(M) / N)
    if np.linalg.norm(M - c * np.eye(N)) > 1e-10:
        raise InvariantViolation("zig-zag contraction is not scalar")
    return c


def nested_cup(params: QGParams, r: int) -> np.ndarray:
    """The r-fold nested duality vector in C^(N^{2r}); r = 0 gives scalar 1."""
    N = params.N
    t = invariant_vector(params).reshape(N, N)
    cup = np.ones((1, 1), dtype=np.complex128)
    for depth in range(r):
        # t_r[(i, u, v, j)] = t[i, j] * t_{r-1}[(u, v)]
        m = N ** depth
        cup = np.einsum("ij,uv->iuvj", t, cup.reshape(m, m)).reshape(
            N ** (depth + 1), N ** (depth + 1))
    return cup.reshape(N ** (2 * r)) if r > 0 else np.ones(1, dtype=np.complex128)


# ---------------------------------------------------------------------------
# the context: lazy, cached construction of all category data
# ---------------------------------------------------------------------------

class IntertwinerContext:
    """Holds (N, F) plus lazily built projections, bases and isometries.

    Budgets: `ambient_bytes` caps any single ambient-space matrix (JW
    projections, level bases); `chain_bytes` caps a chain matrix W_n.  A
    construction that would exceed its cap raises BudgetError instead of
    thrashing.
    """

    def __init__(self, params: QGParams, cache_dir=None,
                 ambient_bytes: int = 200_000_000,
                 chain_bytes: int = 320_000_000):
        self.params = params
        self.N = params.N
        self.ambient_bytes = ambient_bytes
        self.chain_bytes = chain_bytes
        self.t = invariant_vector(params)
        self.t2 = self.t.reshape(self.N, self.N)
        self.cache = fcache.MatrixCache(cache_dir) if cache_dir else None
        self._jw: dict[int, np.ndarray] = {}
        self._basis: dict[int, np.ndarray] = {}
        self._chain_r: dict[int, np.ndarray] = {}
        self._chain_l: dict[int, np.ndarray] = {}
        self._fusion: dict[tuple[int, int, int], np.ndarray] = {}
        self._conj: dict[int, np.ndarray] = {}

    def dim(self, n: int) -> int:
        return chebyshev_dim(n, self.N)

    # -- budget checks ---------------------------------------------------
    def jw_max_level(self) -> int:
        n = 1
        while (self.N ** (n + 1)) ** 2 * 16 <= self.ambient_bytes:
            n += 1
        return n

    def ambient_max_level(self) -> int:
        n = 1
        while self.N ** (n + 1) * self.dim(n + 1) * 16 <= self.ambient_bytes:
            n += 1
        return n

    def chain_max_level(self) -> int:
        n = 2
        while self.dim(n) * self.N * self.dim(n + 1) * 16 <= self.chain_bytes:
            n += 1
        return n

    # -- cache plumbing ----------------------------------------------------
    def _cached(self, kind: int, levels: tuple[int, int, int], build):
        if self.cache is not None:
            hit = self.cache.get(self.N, self.params.f_hash, kind, levels)
            if hit is not None:
                return hit
        M = build()
        if self.cache is not None:
            self.cache.put(self.N, self.params.f_hash, kind, levels, M)
        return M

    # -- Jones-Wenzl projections (ambient) ----------------------------------
    def jw_projection(self, n: int) -> np.ndarray:
        """P_n on (C^N)^(x n): Hermitian idempotent of rank S_n(N).

        Wenzl recursion P_{m+1} = (P_m (x) 1) - (S_{m-1}/S_m) (P_m (x) 1) E_m
        (P_m (x) 1) with E_m = 1^(x m-1) (x) (N t t^H), then Hermitian
        symmetrization and, if a probe detects drift, a polynomial
        re-projection of the spectrum onto {0, 1}.
        """
        if n in self._jw:
            return self._jw[n]
        if n == 0:
            P = np.ones((1, 1), dtype=np.complex128)
            self._jw[0] = P
            return P
        if (self.N ** n) ** 2 * 16 > self.ambient_bytes:
            raise BudgetError(
                f"JW projection at level {n} needs a {self.N ** n}^2 matrix "
                f"(> {self.ambient_bytes} bytes); raise ambient_bytes to force")
        M = self._cached(fcache.KIND_JW, (n, 0, 0), lambda: self._build_jw(n))
        self._jw[n] = M
        return M

    def _build_jw(self, n: int) -> np.ndarray:
        N = self.N
        t = self.t
        P = np.eye(N, dtype=np.complex128)
        for m in range(1, n):
            D = N ** m
            coeff = chebyshev_dim(m - 1, N) / chebyshev_dim(m, N)
            T = np.kron(P, np.eye(N, dtype=np.complex128))   # D*N square
            # apply E_m = 1^（m-1) (x) (N t t^H) to T from the left:
            # rows split as (a, v) with a in N^{m-1}, v in N^2
            T3 = T.reshape(N ** (m - 1), N * N, D * N)
            contracted = np.tensordot(t.conj(), T3, axes=([0], [1]))  # (a, cols)
            ET = (N * t)[None, :, None] * contracted[:, None, :]
            ET = ET.reshape(D * N, D * N)
            P = T - coeff * (T @ ET)
            P = 0.5 * (P + P.conj().T)
            P = self._projection_cleanup(P, chebyshev_dim(m + 1, N))
        return P

    def _projection_cleanup(self, P: np.ndarray, expected_rank: int) -> np.ndarray:
        """Snap the spectrum of an almost-projection onto {0, 1}.

        Uses the gemm-only iteration P <- 3P^2 - 2P^3 when a probe shows
        drift; exact eigenprojection is reserved for hard failures.
        """
        dim = P.shape[0]
        drift = probe_operator_norm(lambda v: P @ (P @ v) - P @ v, dim, iters=12)
        rounds = 0
        while drift > 1e-12 and rounds < 4:
            P2 = P @ P
            P = 3.0 * P2 - 2.0 * (P2 @ P)
            P = 0.5 * (P + P.conj().T)
            drift = probe_operator_norm(lambda v: P @ (P @ v) - P @ v, dim, iters=12)
            rounds += 1
        if drift > 1e-9:
            w, U = np.linalg.eigh(P)
            P = (U[:, w >= 0.5] @ U[:, w >= 0.5].conj().T)
        tr = P.trace().real
        if abs(tr - expected_rank) > 1e-6:
            raise InvariantViolation(
                f"projection rank {tr:.6f} != expected {expected_rank}")
        return P

    # -- compressed chain ---------------------------------------------------
    def chain_r(self, n: int) -> np.ndarray:
        """W_n: coordinates of H_n inside H_{n-1} (x) H_1 ((S_{n-1} N) x S_n)."""
        if n in self._chain_r:
            return self._chain_r[n]
        if n < 2:
            raise ValueError("chain starts at level 2")
        need = self.dim(n - 1) * self.N * self.dim(n) * 16
        if need > self.chain_bytes:
            raise BudgetError(
                f"chain matrix at level {n} needs {need} bytes "
                f"(cap {self.chain_bytes})")
        M = self._cached(fcache.KIND_CHAIN_R, (n, 0, 0), lambda: self._build_chain_r(n))
        self._chain_r[n] = M
        return M

    def _build_chain_r(self, n: int) -> np.ndarray:
        N = self.N
        if n == 2:
            down = self.t.reshape(N * N, 1)          # V[0 <- (1,1)] candidate
        else:
            down = self._down_candidate_r(n - 1)      # V[n-2 <- (n-1,1)]
            down = down / np.sqrt(chebyshev_dim(n - 1, N) / chebyshev_dim(n - 2, N))
        # complement of the lower branch inside H_{n-1} (x) H_1
        Q, _ = scipy.linalg.qr(down, mode="full")
        W = Q[:, down.shape[1]:]
        # qr returns an orthonormal completion; certify it spans ker(down^H)
        resid = np.linalg.norm(down.conj().T @ W)
        if resid > 1e-8 * max(1.0, W.shape[0]):
            raise InvariantViolation(f"chain complement at level {n}: residual {resid}")
        if W.shape[1] != self.dim(n):
            raise InvariantViolation(
                f"chain rank at level {n}: {W.shape[1]} != {self.dim(n)}")
        return np.ascontiguousarray(_phase_fix_columns(W))

    def _down_candidate_r(self, n: int) -> np.ndarray:
        """Raw candidate for V[n-1 <- (n,1)]: sqrt(N) * (W_n^H conj-contracted t)."""
        N = self.N
        W = self.chain_r(n)                      # (S_{n-1} N) x S_n
        W4 = W.reshape(self.dim(n - 1), N, self.dim(n))
        # C[(c,i),m] = sqrt(N) sum_j conj(W[(m,j),c]) t[j,i]
        C = np.sqrt(N) * np.einsum("mjc,ji->cim", W4.conj(), self.t2)
        return C.reshape(self.dim(n) * N, self.dim(n - 1))

    def chain_l(self, n: int) -> np.ndarray:
        """W^L_n: coordinates of H_n inside H_1 (x) H_{n-1} ((N S_{n-1}) x S_n)."""
        if n in self._chain_l:
            return self._chain_l[n]
        if n < 2:
            raise ValueError("chain starts at level 2")
        M = self._cached(fcache.KIND_CHAIN_L, (n, 0, 0), lambda: self._build_chain_l(n))
        self._chain_l[n] = M
        return M

    def _build_chain_l(self, n: int) -> np.ndarray:
        N = self.N
        if n == 2:
            return self.chain_r(2).copy()
        # shuffle S_n[(i,c),(c',j)] = sum_e conj(W_{n-1}[(e,j),c]) WL_{n-1}[(i,e),c']
        Wr = self.chain_r(n - 1).reshape(self.dim(n - 2), N, self.dim(n - 1))
        Wl = self.chain_l(n - 1).reshape(N, self.dim(n - 2), self.dim(n - 1))
        S = np.einsum("ejc,ied->icdj", Wr.conj(), Wl)
        S = S.reshape(N * self.dim(n - 1), self.dim(n - 1) * N)
        WL = S @ self.chain_r(n)
        # exact isometry in exact arithmetic; certify and keep
        g = WL.conj().T @ WL
        err = np.linalg.norm(g - np.eye(WL.shape[1]))
        if err > 1e-7 * WL.shape[1]:
            raise InvariantViolation(f"left chain at level {n} not isometric: {err}")
        return np.ascontiguousarray(WL)

    def _down_candidate_l(self, k: int) -> np.ndarray:
        """Raw candidate for V[k-1 <- (1,k)] from the left chain."""
        N = self.N
        WL = self.chain_l(k).reshape(N, self.dim(k - 1), self.dim(k))
        # C[(i,c),m] = sqrt(N) sum_j conj(WL[(j,m),c]) t[i,j]
        C = np.sqrt(N) * np.einsum("jmc,ij->icm", WL.conj(), self.t2)
        return C.reshape(N * self.dim(k), self.dim(k - 1))

    # -- level bases (ambient) ----------------------------------------------
    def basis(self, n: int) -> np.ndarray:
        """B_n (N^n x S_n): orthonormal columns spanning range(P_n)."""
        if n in self._basis:
            return self._basis[n]
        if n == 0:
            B = np.ones((1, 1), dtype=np.complex128)
        elif n == 1:
            B = np.eye(self.N, dtype=np.complex128)
        else:
            need = self.N ** n * self.dim(n) * 16
            if need > self.ambient_bytes:
                raise BudgetError(
                    f"ambient basis at level {n} needs {need} bytes "
                    f"(cap {self.ambient_bytes})")
            B = self._cached(fcache.KIND_BASIS, (n, 0, 0), lambda: self._build_basis(n))
        self._basis[n] = B
        return B

    def _build_basis(self, n: int) -> np.ndarray:
        N = self.N
        Bp = self.basis(n - 1)                               # N^{n-1} x S_{n-1}
        W = self.chain_r(n).reshape(self.dim(n - 1), N, self.dim(n))
        B = np.einsum("ac,cjm->ajm", Bp, W).reshape(N ** n, self.dim(n))
        return np.ascontiguousarray(B)

    # -- fusion isometries ----------------------------------------------------
    def fusion_isometry(self, n: int, k: int, l: int) -> np.ndarray:
        """V[l <- (n,k)]: isometry H_l -> H_n (x) H_k ((S_n S_k) x S_l).

        Chain route when one factor is the fundamental level; ambient cup
        insertion otherwise.  Deterministic phases throughout.
        """
        if not in_fusion_range(l, n, k):
            raise ValueError(f"level {l} not in fusion range of ({n},{k})")
        key = (n, k, l)
        if key in self._fusion:
            return self._fusion[key]
        M = self._cached(fcache.KIND_FUSION, key, lambda: self._build_fusion(n, k, l))
        self._fusion[key] = M
        return M

    def _build_fusion(self, n: int, k: int, l: int) -> np.ndarray:
        N = self.N
        if n == 0:
            return np.eye(self.dim(k), dtype=np.complex128)
        if k == 0:
            return np.eye(self.dim(n), dtype=np.complex128)
        if n == 1 and k == 1 and l == 0:
            return _phase_fix_global(self.t.reshape(N * N, 1).copy())
        if k == 1 and l == n + 1:
            return self.chain_r(n + 1).copy()
        if n == 1 and l == k + 1:
            return self.chain_l(k + 1).copy()
        if k == 1 and l == n - 1:
            C = self._down_candidate_r(n)
            return self._normalize_isometry(C, n, 1, l)
        if n == 1 and l == k - 1:
            C = self._down_candidate_l(k)
            return self._normalize_isometry(C, 1, k, l)
        return self._build_fusion_ambient(n, k, l)

    def _build_fusion_ambient(self, n: int, k: int, l: int) -> np.ndarray:
        """Cup-insertion route: compress (B_l with r nested cups) by B_n (x) B_k."""
        N = self.N
        r = (n + k - l) // 2
        for lev in (n, k, l):
            self.basis(lev)      # raises BudgetError early if out of reach
        Bl = self.basis(l).reshape(N ** (n - r), N ** (k - r), self.dim(l))
        cup = nested_cup(self.params, r).reshape(N ** r, N ** r) if r else None
        Bn = self.basis(n)
        Bk = self.basis(k)
        cols = np.empty((self.dim(n) * self.dim(k), self.dim(l)),
                        dtype=np.complex128)
        # process per column: xi -> (a, m1, m2, b) -> compress
        BnH = Bn.conj().T.reshape(self.dim(n), N ** (n - r), N ** r)
        BkC = Bk.conj().reshape(N ** r, N ** (k - r), self.dim(k))
        for c in range(self.dim(l)):
            xi = Bl[:, :, c]                                   # (N^{n-r}, N^{k-r})
            if r == 0:
                mid = np.einsum("pa,ab,bq->pq", BnH.reshape(self.dim(n), -1), xi,
                                BkC.reshape(-1, self.dim(k)))
            else:
                # left half: sum_a BnH[p, a, m1] xi[a, b] -> (p, m1, b)
                left = np.tensordot(BnH, xi, axes=([1], [0]))   # (S_n, N^r, N^{k-r})
                # attach cup and right basis: sum_{m1 m2 b} left * cup[m1,m2] * BkC[m2,b,q]
                right = np.tensordot(cup, BkC, axes=([1], [0]))  # (N^r, N^{k-r}, S_k)
                mid = np.tensordot(left, right, axes=([1, 2], [0, 1]))
            cols[:, c] = mid.reshape(-1)
        return self._normalize_isometry(cols, n, k, l)

    def _normalize_isometry(self, C: np.ndarray, n: int, k: int, l: int) -> np.ndarray:
        """Scale/polish a candidate to an exact isometry, fix the global phase."""
        norms2 = np.einsum("ij,ij->j", C.conj(), C).real
        beta2 = float(np.mean(norms2))
        if beta2 <= 0:
            raise InvariantViolation(f"fusion candidate ({n},{k},{l}) vanished")
        V = C / np.sqrt(beta2)
        G = V.conj().T @ V
        err = np.linalg.norm(G - np.eye(V.shape[1]))
        if err > 1e-8 * max(1, V.shape[1]):
            # exact polar correction via the small Gram matrix
            w, U = np.linalg.eigh(G)
            if np.min(w) < 1e-12:
                raise InvariantViolation(
                    f"fusion candidate ({n},{k},{l}) rank deficient: min gram {np.min(w)}")
            V = V @ (U * (w ** -0.5)) @ U.conj().T
        return np.ascontiguousarray(_phase_fix_global(V))

    # -- conjugations -----------------------------------------------------------
    def conjugation(self, n: int) -> np.ndarray:
        """J_n with j_n(xi) = J_n conj(xi): unitary, J_n conj(J_n) = eps^n."""
        if n in self._conj:
            return self._conj[n]
        M = self._cached(fcache.KIND_CONJ, (n, 0, 0), lambda: self._build_conj(n))
        self._conj[n] = M
        return M

    def _build_conj(self, n: int) -> np.ndarray:
        N = self.N
        if n == 0:
            return np.ones((1, 1), dtype=np.complex128)
        if n == 1:
            return self.params.F.copy()
        B = self.basis(n)
        d = self.dim(n)
        # ambient antilinear map: strand reversal after F on every strand
        Fn = B.conj().reshape((N,) * n + (d,))
        for axis in range(n):
            Fn = np.tensordot(self.params.F, Fn, axes=([1], [axis]))
            # tensordot moves the contracted axis to the front; rotate back
            Fn = np.moveaxis(Fn, 0, axis)
        Fn = np.transpose(Fn, tuple(range(n - 1, -1, -1)) + (n,))
        J = B.conj().T @ Fn.reshape(N ** n, d)
        G = J.conj().T @ J
        err = np.linalg.norm(G - np.eye(d))
        if err > 1e-6 * d:
            raise InvariantViolation(
                f"conjugation at level {n} not unitary (residual {err}); "
                "sign convention mismatch")
        if err > 1e-10 * d:
            w, U = np.linalg.eigh(G)
            J = J @ (U * (w ** -0.5)) @ U.conj().T
        return np.ascontiguousarray(J)

    # -- validation suites -------------------------------------------------------
    def validate_jw(self, n: int, tol_idem: float = 1e-9,
                    tol_cup: float = 1e-9) -> dict:
        """Certify P_n: Hermitian, idempotent, rank S_n, annihilates every cup."""
        P = self.jw_projection(n)
        dim = P.shape[0]
        herm = float(np.linalg.norm(P - P.conj().T) / max(1.0, np.linalg.norm(P)))
        idem = probe_operator_norm(lambda v: P @ (P @ v) - P @ v, dim, iters=30)
        rank = float(P.trace().real)
        cup_norms = []
        N = self.N
        for i in range(n - 1):
            # apply P to every (e_a (x) t (x) e_b): all cup insertions at slot i
            left, right = N ** i, N ** (n - 2 - i)
            probe = np.eye(left * right, dtype=np.complex128).reshape(
                left, right, left * right)
            vec = np.einsum("arc,v->avrc", probe, self.t).reshape(dim, left * right)
            M = P @ vec
            cup_norms.append(float(np.linalg.norm(M) / np.sqrt(left * right)))
        ok = (herm <= tol_idem and idem <= tol_idem
              and abs(rank - self.dim(n)) < 1e-6
              and all(c <= tol_cup for c in cup_norms))
        return {"level": n, "hermitian_residual": herm, "idempotent_residual": idem,
                "rank": rank, "expected_rank": self.dim(n),
                "cup_residuals": cup_norms, "ok": bool(ok)}

    def validate_completeness(self, n: int, k: int, tol: float = 1e-8,
                              seed: int = 11) -> dict:
        """Probe-certified ||sum_l V_l V_l^H - 1|| on H_n (x) H_k."""
        Vs = [self.fusion_isometry(n, k, l) for l in fusion_range(n, k)]
        D = self.dim(n) * self.dim(k)

        def defect(v):
            acc = -v
            for V in Vs:
                acc = acc + V @ (V.conj().T @ v)
            return acc

        norm = probe_operator_norm(defect, D, iters=50, seed=seed)
        return {"n": n, "k": k, "defect_norm": norm, "ok": bool(norm <= tol)}

    def validate_conjugation_consistency(self, n: int, k: int, l: int,
                                         tol: float = 1e-6) -> dict:
        """(J_n (x) J_k) conj(V[l <- (n,k)]) J_l^H is an isometry which, after
        swapping the tensor factors, is V[l <- (k,n)] up to a unimodular scalar.

        Conjugating a tensor product reverses its factors, so the factor swap
        is part of the identity; the overlap |<V[l <- (k,n)], swap(W)>| = d_l
        certifies the proportionality.
        """
        V = self.fusion_isometry(n, k, l)
        Vr = self.fusion_isometry(k, n, l)
        Jn, Jk, Jl = self.conjugation(n), self.conjugation(k), self.conjugation(l)
        W = np.kron(Jn, Jk) @ V.conj() @ Jl.conj().T
        iso = np.linalg.norm(W.conj().T @ W - np.eye(self.dim(l)))
        Wf = W.reshape(self.dim(n), self.dim(k), self.dim(l)).transpose(1, 0, 2)
        overlap = abs(np.trace(Vr.conj().T @ Wf.reshape(-1, self.dim(l))))
        return {"n": n, "k": k, "l": l, "isometry_residual": float(iso),
                "overlap": float(overlap), "expected_overlap": self.dim(l),
                "ok": bool(iso <= tol and abs(overlap - self.dim(l)) <= tol * self.dim(l))}
