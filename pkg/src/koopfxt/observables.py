"""Koopman observables: basis families, lifting, and the block lifting matrix.

The generator regression is written against the block matrix

    Psi(x) = blockdiag(psi(x)^T, ..., psi(x)^T)        (N x N^2)

acting on ``lam = vec(L)`` (columns of the N x N generator matrix stacked).
Psi is never formed; block ``k`` of ``lam`` is column ``k`` of ``L`` so that
``Psi(x) @ lam == L.T @ psi(x)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateLiftingError, DimensionError

SQRT2 = np.sqrt(2.0)
RANK_TOL = 1e-10


@dataclass(frozen=True)
class BasisTerm:
    """One scalar observable.

    ``kind`` is ``"const"``, ``"cos"``, ``"sin"`` or ``"mono"``. Trig terms are
    ``sqrt(2) cos(harmonic * pi * x[state])`` (resp. sin); monomials are
    ``prod_i x[i] ** exponents[i]``.
    """

    kind: str
    state: int = -1
    harmonic: int = 0
    exponents: tuple[int, ...] = ()

    def label(self) -> str:
        if self.kind == "const":
            return "1"
        if self.kind in ("cos", "sin"):
            return f"sqrt2*{self.kind}({self.harmonic}*pi*z{self.state})"
        parts = [f"z{i}^{e}" if e > 1 else f"z{i}" for i, e in enumerate(self.exponents) if e]
        return "*".join(parts)


@dataclass(frozen=True)
class BasisSet:
    """An ordered, immutable set of N observables over R^n."""

    terms: tuple[BasisTerm, ...]
    n: int
    _trig: tuple = field(init=False, repr=False, compare=False)
    _mono: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.N <= self.n:
            raise ConfigurationError(f"basis needs N > n, got N={self.N}, n={self.n}")
        rows, states, freqs, is_cos = [], [], [], []
        mono = []
        for k, term in enumerate(self.terms):
            if term.kind in ("cos", "sin"):
                if not 0 <= term.state < self.n:
                    raise ConfigurationError(f"state index {term.state} out of range for n={self.n}")
                rows.append(k)
                states.append(term.state)
                freqs.append(term.harmonic * np.pi)
                is_cos.append(term.kind == "cos")
            elif term.kind == "mono":
                if len(term.exponents) != self.n:
                    raise ConfigurationError("monomial exponent vector must have length n")
                mono.append((k, np.asarray(term.exponents, dtype=int)))
            elif term.kind != "const":
                raise ConfigurationError(f"unknown basis term kind {term.kind!r}")
        trig = (
            np.asarray(rows, dtype=int),
            np.asarray(states, dtype=int),
            np.asarray(freqs, dtype=float),
            np.asarray(is_cos, dtype=bool),
        )
        object.__setattr__(self, "_trig", trig)
        object.__setattr__(self, "_mono", tuple(mono))

    @property
    def N(self) -> int:
        return len(self.terms)

    @property
    def includes_constant(self) -> bool:
        return bool(self.terms) and self.terms[0].kind == "const"

    def labels(self) -> list[str]:
        return [t.label() for t in self.terms]

    def evaluate(self, x) -> np.ndarray:
        """Return psi(x), shape (N,)."""
        x = _as_state(x, self.n)
        psi = np.zeros(self.N)
        for k, t in enumerate(self.terms):
            if t.kind == "const":
                psi[k] = 1.0
        rows, states, freqs, is_cos = self._trig
        if rows.size:
            ang = freqs * x[states]
            psi[rows] = SQRT2 * np.where(is_cos, np.cos(ang), np.sin(ang))
        for k, e in self._mono:
            psi[k] = np.prod(x**e)
        return psi

    def jacobian(self, x) -> np.ndarray:
        """Return d psi / dx, shape (N, n)."""
        x = _as_state(x, self.n)
        jac = np.zeros((self.N, self.n))
        rows, states, freqs, is_cos = self._trig
        if rows.size:
            ang = freqs * x[states]
            jac[rows, states] = SQRT2 * freqs * np.where(is_cos, -np.sin(ang), np.cos(ang))
        for k, e in self._mono:
            for j in np.flatnonzero(e):
                ej = e.copy()
                ej[j] -= 1
                jac[k, j] = e[j] * np.prod(x**ej)
        return jac


@dataclass(frozen=True)
class LiftedFrame:
    psi: np.ndarray
    jac: np.ndarray
    jac_pinv: np.ndarray
    sigma_min_jac: float
    sigma_max_jac: float

    @property
    def psi_norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    @property
    def sigma_max_W(self) -> float:
        # W = jac^+ Psi has singular values |psi| / sigma_i(jac).
        return self.psi_norm / self.sigma_min_jac

    @property
    def sigma_min_W(self) -> float:
        return self.psi_norm / self.sigma_max_jac


STATE_NAMES = ("x", "y", "vx", "vy")


def make_paper_basis(
    n_values: Iterable[int],
    states: Sequence[int | str] = (0, 1, 2, 3),
    include_constant: bool = True,
    n: int = 4,
) -> BasisSet:
    """Sinusoidal basis ``{1} U {sqrt2 cos(k pi z), sqrt2 sin(k pi z)}``.

    Ordered constant first, then by state index, then harmonic, cos before sin.
    ``states`` may hold indices or the names ``x, y, vx, vy``.
    """
    harmonics = sorted(set(int(k) for k in n_values))
    if not harmonics:
        raise ConfigurationError("n_values must be nonempty")
    if any(k < 1 for k in harmonics):
        raise ConfigurationError("harmonics must be positive integers")
    idx = sorted(set(_state_index(s, n) for s in states))
    if not idx:
        raise ConfigurationError("at least one state index is required")
    terms = [BasisTerm("const")] if include_constant else []
    for i in idx:
        for k in harmonics:
            terms.append(BasisTerm("cos", state=i, harmonic=k))
            terms.append(BasisTerm("sin", state=i, harmonic=k))
    return BasisSet(tuple(terms), n)


def make_monomial_basis(
    degree: int,
    states: Sequence[int | str] | None = None,
    n: int = 1,
    include_constant: bool = True,
) -> BasisSet:
    """All monomials of total degree 1..degree in the selected states (graded order)."""
    if degree < 1:
        raise ConfigurationError("monomial degree must be >= 1")
    idx = list(range(n)) if states is None else sorted(set(_state_index(s, n) for s in states))
    if not idx:
        raise ConfigurationError("at least one state index is required")
    terms = [BasisTerm("const")] if include_constant else []
    for d in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(idx, d):
            exps = [0] * n
            for i in combo:
                exps[i] += 1
            terms.append(BasisTerm("mono", exponents=tuple(exps)))
    return BasisSet(tuple(terms), n)


def lift(basis: BasisSet, x, rank_tol: float = RANK_TOL) -> LiftedFrame:
    """Evaluate psi, its Jacobian and the Jacobian pseudoinverse at ``x``."""
    psi = basis.evaluate(x)
    jac = basis.jacobian(x)
    U, S, Vt = np.linalg.svd(jac, full_matrices=False)
    smax = float(S[0]) if S.size else 0.0
    smin = float(S[-1]) if S.size else 0.0
    if not np.isfinite(smax) or smax == 0.0 or smin <= rank_tol * smax:
        raise DegenerateLiftingError(smin, smax)
    jac_pinv = Vt.T @ (U.T / S[:, None])
    return LiftedFrame(psi, jac, jac_pinv, smin, smax)


def psi_block_apply(psi, lam) -> np.ndarray:
    """Return ``Psi(x) @ lam`` where entry k is ``psi . block_k(lam)``."""
    psi = np.asarray(psi, dtype=float)
    lam = np.asarray(lam, dtype=float)
    N = psi.size
    if lam.shape != (N * N,):
        raise DimensionError(f"lambda must have length N^2 = {N * N}, got shape {lam.shape}")
    return lam.reshape(N, N) @ psi


def psi_block_transpose_apply(psi, v) -> np.ndarray:
    """Return ``Psi(x)^T @ v``; block k equals ``v[k] * psi``."""
    psi = np.asarray(psi, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.shape != psi.shape:
        raise DimensionError(f"v must have length N = {psi.size}, got shape {v.shape}")
    return np.outer(v, psi).ravel()


def materialize_psi(psi) -> np.ndarray:
    """Dense N x N^2 block matrix. Only meant for small-N checks."""
    psi = np.asarray(psi, dtype=float)
    return np.kron(np.eye(psi.size), psi[None, :])


def psi_singular_values(psi) -> tuple[float, float]:
    """(sigma_max, smallest nonzero sigma) of Psi(x); both equal |psi|_2."""
    nrm = float(np.linalg.norm(psi))
    return nrm, nrm


def vec(L) -> np.ndarray:
    """Column-stack an N x N matrix into the generator vector."""
    return np.asarray(L, dtype=float).T.ravel()


def unvec(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    N = int(round(np.sqrt(lam.size)))
    if N * N != lam.size:
        raise DimensionError(f"length {lam.size} is not a perfect square")
    return lam.reshape(N, N).T


def _state_index(s, n: int) -> int:
    if isinstance(s, str):
        if s not in STATE_NAMES[:n]:
            raise ConfigurationError(f"unknown state name {s!r}")
        return STATE_NAMES.index(s)
    i = int(s)
    if not 0 <= i < n:
        raise ConfigurationError(f"state index {i} out of range for n={n}")
    return i


def _as_state(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != n:
        raise DimensionError(f"state must have dimension {n}, got {x.size}")
    return x
