"""Sparse real multivariate polynomials keyed by exponent tuples."""
from __future__ import annotations

from collections import defaultdict
from numbers import Real

import numpy as np


class SparsePolynomial:
    """Polynomial ``sum_alpha c_alpha x^alpha`` in ``nvars`` real variables.

    Zero coefficients are never stored, so ``terms`` is canonical.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms=None, tol: float = 0.0):
        self.nvars = int(nvars)
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.nvars or min(alpha, default=0) < 0:
                raise ValueError(f"bad exponent {alpha} for {self.nvars} variables")
            if abs(c) > tol:
                clean[alpha] = clean.get(alpha, 0.0) + float(c)
        self.terms = {a: c for a, c in clean.items() if c != 0.0}

    # --- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, nvars: int, value: float) -> "SparsePolynomial":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "SparsePolynomial":
        alpha = [0] * nvars
        alpha[i] = 1
        return cls(nvars, {tuple(alpha): 1.0})

    @classmethod
    def quadratic_form(cls, Q, const: float = 0.0, tol: float = 1e-15) -> "SparsePolynomial":
        """``x^T Q x + const`` for a real square ``Q`` (only its symmetric part counts)."""
        Q = np.asarray(Q, dtype=float)
        p = Q.shape[0]
        terms = defaultdict(float)
        if const:
            terms[(0,) * p] += const
        S = 0.5 * (Q + Q.T)
        for i in range(p):
            for j in range(i, p):
                c = S[i, j] if i == j else 2.0 * S[i, j]
                if abs(c) > tol:
                    alpha = [0] * p
                    alpha[i] += 1
                    alpha[j] += 1
                    terms[tuple(alpha)] += c
        return cls(p, terms)

    # --- properties --------------------------------------------------------

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    @property
    def half_degree(self) -> int:
        return -(-self.degree // 2)

    def coefficient(self, alpha) -> float:
        return self.terms.get(tuple(alpha), 0.0)

    def is_zero(self) -> bool:
        return not self.terms

    # --- arithmetic --------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, SparsePolynomial):
            if other.nvars != self.nvars:
                raise ValueError("polynomials live in different variable spaces")
            return other
        if isinstance(other, Real):
            return SparsePolynomial.constant(self.nvars, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self.terms)
        for a, c in other.terms.items():
            terms[a] = terms.get(a, 0.0) + c
        return SparsePolynomial(self.nvars, terms)

    __radd__ = __add__

    def __neg__(self):
        return SparsePolynomial(self.nvars, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Real):
            return SparsePolynomial(self.nvars, {a: c * other for a, c in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = defaultdict(float)
        for a, c in self.terms.items():
            for b, d in other.terms.items():
                terms[tuple(i + j for i, j in zip(a, b))] += c * d
        return SparsePolynomial(self.nvars, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = SparsePolynomial.constant(self.nvars, 1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, SparsePolynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __repr__(self):
        return f"SparsePolynomial({self.nvars}, {self.terms!r})"

    # --- evaluation --------------------------------------------------------

    def __call__(self, x):
        """Evaluate at a point ``(nvars,)`` or a batch ``(N, nvars)``."""
        x = np.asarray(x, dtype=float)
        if not self.terms:
            return np.zeros(x.shape[:-1]) if x.ndim > 1 else 0.0
        alphas = np.array(list(self.terms), dtype=int)
        coefs = np.array(list(self.terms.values()))
        mons = np.prod(x[..., None, :] ** alphas, axis=-1)
        val = mons @ coefs
        return float(val) if x.ndim == 1 else val

    def substitute_zero(self, index: int) -> "SparsePolynomial":
        """Drop variable ``index`` after setting it to zero."""
        terms = {a[:index] + a[index + 1:]: c for a, c in self.terms.items() if a[index] == 0}
        return SparsePolynomial(self.nvars - 1, terms)

    def to_dict(self) -> dict:
        return {"nvars": self.nvars,
                "terms": [[list(a), c] for a, c in sorted(self.terms.items())]}

    @classmethod
    def from_dict(cls, data: dict) -> "SparsePolynomial":
        return cls(data["nvars"], {tuple(a): c for a, c in data["terms"]})
