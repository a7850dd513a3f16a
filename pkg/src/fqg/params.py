"""Quantum group parameters: the pair (N, F) with F unitary and F·conj(F) = ±1.

The sign epsilon = +1 gives the orthogonal-type family (F = identity is the
standard representative), epsilon = -1 the symplectic-type family (needs even
N).  All downstream constructions take a QGParams and are deterministic
functions of (N, F).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

UNITARITY_TOL = 1e-12


class ParameterError(ValueError):
    """Invalid quantum group parameters."""


@dataclass(frozen=True)
class QGParams:
    """Parameters (N, F) of a unimodular free orthogonal quantum group.

    N is the matrix size (N >= 3 for non-amenability), F a unitary N x N
    matrix with F @ conj(F) = epsilon * I, epsilon in {+1, -1}.
    """

    N: int
    F: np.ndarray = field(repr=False)
    epsilon: int

    def __post_init__(self):
        if self.N < 3:
            raise ParameterError(f"need N >= 3, got N = {self.N}")
        F = np.asarray(self.F, dtype=np.complex128)
        if F.shape != (self.N, self.N):
            raise ParameterError(f"F must be {self.N}x{self.N}, got {F.shape}")
        if np.linalg.norm(F.conj().T @ F - np.eye(self.N)) > UNITARITY_TOL * self.N:
            raise ParameterError("F is not unitary")
        FFbar = F @ F.conj()
        eps = self.epsilon
        if eps not in (+1, -1):
            raise ParameterError(f"epsilon must be +1 or -1, got {eps}")
        if np.linalg.norm(FFbar - eps * np.eye(self.N)) > UNITARITY_TOL * self.N:
            raise ParameterError("F @ conj(F) != epsilon * I")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)

    @property
    def f_hash(self) -> bytes:
        """SHA-256 of (N, F) bytes; keys the intertwiner cache."""
        h = hashlib.sha256()
        h.update(self.N.to_bytes(4, "little"))
        h.update(np.ascontiguousarray(self.F).tobytes())
        return h.digest()

    def __hash__(self):
        return hash((self.N, self.f_hash))

    def __eq__(self, other):
        if not isinstance(other, QGParams):
            return NotImplemented
        return self.N == other.N and self.f_hash == other.f_hash


def identity_params(N: int) -> QGParams:
    """F = identity; epsilon = +1."""
    return QGParams(N=N, F=np.eye(N, dtype=np.complex128), epsilon=+1)


def symplectic_params(N: int) -> QGParams:
    """F = [[0, I], [-I, 0]]; epsilon = -1.  Requires even N."""
    if N % 2:
        raise ParameterError(f"symplectic F needs even N, got {N}")
    m = N // 2
    F = np.zeros((N, N), dtype=np.complex128)
    F[:m, m:] = np.eye(m)
    F[m:, :m] = -np.eye(m)
    return QGParams(N=N, F=F, epsilon=-1)


def params_from_spec(spec: str | dict, N: int | None = None) -> QGParams:
    """Resolve a parameter spec: 'identity', 'symplectic', or an explicit matrix.

    A dict spec carries {"kind": ..., "N": ...} or {"matrix": [[...], ...]}.
    """
    if isinstance(spec, dict):
        if "matrix" in spec:
            F = np.asarray(spec["matrix"], dtype=np.complex128)
            FFbar = F @ F.conj()
            eps = int(round(FFbar[0, 0].real))
            return QGParams(N=F.shape[0], F=F, epsilon=eps)
        kind = spec.get("kind", "identity")
        N = spec.get("N", N)
        spec = kind
    if N is None:
        raise ParameterError("N required for a named parameter spec")
    if spec == "identity":
        return identity_params(N)
    if spec == "symplectic":
        return symplectic_params(N)
    raise ParameterError(f"unknown parameter spec {spec!r}")
