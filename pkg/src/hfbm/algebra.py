"""Matrix algebra C^{d,d}, its tensor powers and the sharp actions between them.

Conventions:

* A dense 2-tensor is a complex array ``T[i, j, k, l]``, the coefficient of
  ``E_ij (x) E_kl``.
* Simple-tensor lists are sequences of ``(weight, U1, U2)`` or
  ``(weight, U1, U2, U3)``; they are never densified except on request.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "NCPolynomial",
    "Tensor2",
    "Tensor3",
    "dual_tensor2",
    "frobenius",
    "id_tr_id",
    "matrix_unit",
    "nc_derivative",
    "sharp_1_3",
    "sharp_2_1",
    "sharp_3_1",
    "trace_normalized",
]


def matrix_unit(d: int, i: int, j: int) -> np.ndarray:
    """``E_ij`` with 1-based indices."""
    E = np.zeros((d, d), dtype=complex)
    E[i - 1, j - 1] = 1.0
    return E


def frobenius(A) -> float:
    if isinstance(A, (Tensor2, Tensor3)):
        A = A.dense()
    return float(np.sqrt(np.sum(np.abs(A) ** 2)))


def _check_square(*mats):
    d = mats[0].shape[-1]
    for M in mats:
        if M.shape[-2:] != (d, d):
            raise ValueError(f"dimension mismatch: expected ({d}, {d}), got {M.shape[-2:]}")
    return d


@dataclass
class Tensor2:
    """Element of A (x) A, held densely, as a simple-tensor list, or both."""

    dim: int
    terms: list = field(default_factory=list)
    coeffs: np.ndarray | None = None

    @classmethod
    def simple(cls, U, V, weight=1.0) -> "Tensor2":
        U = np.asarray(U, dtype=complex)
        V = np.asarray(V, dtype=complex)
        d = _check_square(U, V)
        return cls(d, [(complex(weight), U, V)])

    @classmethod
    def from_dense(cls, coeffs) -> "Tensor2":
        coeffs = np.asarray(coeffs, dtype=complex)
        d = coeffs.shape[0]
        if coeffs.shape != (d, d, d, d):
            raise ValueError("dense 2-tensor must have shape (d, d, d, d)")
        return cls(d, [], coeffs)

    @classmethod
    def zeros(cls, d: int) -> "Tensor2":
        return cls(d, [])

    def dense(self) -> np.ndarray:
        out = np.zeros((self.dim,) * 4, dtype=complex) if self.coeffs is None else self.coeffs.copy()
        for w, U, V in self.terms:
            out += w * np.einsum("ij,kl->ijkl", U, V)
        return out

    def to_dense(self) -> "Tensor2":
        return Tensor2.from_dense(self.dense())

    def to_simple(self) -> "Tensor2":
        """Expand onto matrix units: one simple term per nonzero coefficient."""
        d = self.dim
        C = self.dense()
        terms = [
            (C[idx], matrix_unit(d, idx[0] + 1, idx[1] + 1), matrix_unit(d, idx[2] + 1, idx[3] + 1))
            for idx in zip(*np.nonzero(C))
        ]
        return Tensor2(d, terms)

    def __add__(self, other: "Tensor2") -> "Tensor2":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        if self.coeffs is None and other.coeffs is None:
            coeffs = None
        else:
            coeffs = np.zeros((self.dim,) * 4, dtype=complex)
            for c in (self.coeffs, other.coeffs):
                if c is not None:
                    coeffs = coeffs + c
        return Tensor2(self.dim, self.terms + other.terms, coeffs)

    def __mul__(self, a) -> "Tensor2":
        coeffs = None if self.coeffs is None else a * self.coeffs
        return Tensor2(self.dim, [(a * w, U, V) for w, U, V in self.terms], coeffs)

    __rmul__ = __mul__

    def norm(self) -> float:
        return frobenius(self.dense())


@dataclass
class Tensor3:
    """Element of A (x) A (x) A as a weighted list of simple tensors."""

    dim: int
    terms: list = field(default_factory=list)

    @classmethod
    def simple(cls, U1, U2, U3, weight=1.0) -> "Tensor3":
        mats = [np.asarray(M, dtype=complex) for M in (U1, U2, U3)]
        d = _check_square(*mats)
        return cls(d, [(complex(weight), *mats)])

    def dense(self) -> np.ndarray:
        out = np.zeros((self.dim,) * 6, dtype=complex)
        for w, U1, U2, U3 in self.terms:
            out += w * np.einsum("ab,cd,ef->abcdef", U1, U2, U3)
        return out

    def __add__(self, other: "Tensor3") -> "Tensor3":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return Tensor3(self.dim, self.terms + other.terms)

    def __mul__(self, a) -> "Tensor3":
        return Tensor3(self.dim, [(a * w, *mats) for w, *mats in self.terms])

    __rmul__ = __mul__


def sharp_2_1(T: Tensor2, Y) -> np.ndarray:
    """``(U1 (x) U2) # Y = U1 Y U2`` extended linearly."""
    Y = np.asarray(Y, dtype=complex)
    if Y.shape != (T.dim, T.dim):
        raise ValueError("dimension mismatch")
    out = np.zeros_like(Y)
    for w, U, V in T.terms:
        out += w * (U @ Y @ V)
    if T.coeffs is not None:
        # (E_ik (x) E_lj) # Y = Y(k, l) E_ij
        out += np.einsum("iklj,kl->ij", T.coeffs, Y)
    return out


def sharp_1_3(Y, T: Tensor3) -> Tensor2:
    """``Y # (U1 (x) U2 (x) U3) = (U1 Y U2) (x) U3``."""
    Y = np.asarray(Y, dtype=complex)
    if Y.shape != (T.dim, T.dim):
        raise ValueError("dimension mismatch")
    return Tensor2(T.dim, [(w, U1 @ Y @ U2, U3) for w, U1, U2, U3 in T.terms])


def sharp_3_1(T: Tensor3, Y) -> Tensor2:
    """``(U1 (x) U2 (x) U3) # Y = U1 (x) (U2 Y U3)``."""
    Y = np.asarray(Y, dtype=complex)
    if Y.shape != (T.dim, T.dim):
        raise ValueError("dimension mismatch")
    return Tensor2(T.dim, [(w, U1, U2 @ Y @ U3) for w, U1, U2, U3 in T.terms])


def trace_normalized(A):
    """``(1/d) sum_i A(i, i)``; stacks of matrices give an array of traces."""
    A = np.asarray(A)
    tr = np.trace(A, axis1=-2, axis2=-1) / A.shape[-1]
    return complex(tr) if A.ndim == 2 else tr


def id_tr_id(T: Tensor3) -> np.ndarray:
    """``U1 (x) U2 (x) U3 -> Tr_d(U2) U1 U3``."""
    out = np.zeros((T.dim, T.dim), dtype=complex)
    for w, U1, U2, U3 in T.terms:
        out += w * trace_normalized(U2) * (U1 @ U3)
    return out


def dual_tensor2(T: Tensor2) -> Tensor2:
    """Antilinear flip ``U (x) V -> V* (x) U*``."""
    terms = [(np.conj(w), V.conj().T, U.conj().T) for w, U, V in T.terms]
    coeffs = None
    if T.coeffs is not None:
        # new[a, b, c, e] = conj(old[e, c, b, a])
        coeffs = np.conj(np.transpose(T.coeffs, (3, 2, 1, 0)))
    return Tensor2(T.dim, terms, coeffs)


@dataclass(frozen=True)
class NCPolynomial:
    """Polynomial ``a_0 + a_1 X + ... + a_m X^m`` in one matrix variable."""

    coefficients: tuple

    def __init__(self, coefficients: Sequence = ()):
        coeffs = list(coefficients)
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coefficients", tuple(coeffs))

    @classmethod
    def monomial(cls, m: int, a=1.0) -> "NCPolynomial":
        return cls([0.0] * m + [a])

    @property
    def degree(self) -> int:
        """Degree; -1 for the zero polynomial."""
        return len(self.coefficients) - 1

    def is_zero(self) -> bool:
        return not self.coefficients

    def powers(self, X) -> list:
        """``[X^0, ..., X^deg]``; works on stacks of matrices."""
        X = np.asarray(X, dtype=complex)
        eye = np.broadcast_to(np.eye(X.shape[-1], dtype=complex), X.shape)
        out = [eye.copy()]
        for _ in range(max(self.degree, 0)):
            out.append(out[-1] @ X)
        return out

    def __call__(self, X, powers=None) -> np.ndarray:
        X = np.asarray(X, dtype=complex)
        powers = self.powers(X) if powers is None else powers
        out = np.zeros(X.shape, dtype=complex)
        for a, Xp in zip(self.coefficients, powers):
            if a != 0:
                out = out + a * Xp
        return out

    def derivative(self) -> "NCPolynomial":
        """Ordinary derivative (the scalar shadow of ``nc_derivative``)."""
        return NCPolynomial([m * a for m, a in enumerate(self.coefficients)][1:])

    def abs(self) -> "NCPolynomial":
        return NCPolynomial([abs(a) for a in self.coefficients])

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        return " + ".join(f"{a:g}*X^{m}" for m, a in enumerate(self.coefficients) if a != 0)


def nc_derivative(P: NCPolynomial, X) -> Tensor2:
    """``dX^m = sum_{i<m} X^i (x) X^(m-1-i)`` extended linearly."""
    X = np.asarray(X, dtype=complex)
    d = X.shape[-1]
    powers = P.powers(X)
    terms = []
    for m, a in enumerate(P.coefficients):
        if m == 0 or a == 0:
            continue
        for i in range(m):
            terms.append((complex(a), powers[i], powers[m - 1 - i]))
    return Tensor2(d, terms)
