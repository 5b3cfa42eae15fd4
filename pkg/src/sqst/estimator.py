"""Post-processing: element estimates, sample planning, operator mean values.

Every estimator is a pure fold over one immutable record, so any element (or
any operator in the bounded manifold) can be re-estimated from the same data
without new measurements.  Folds are computed by counting outcome
multiplicities once and taking the count-weighted sum over (m, k) cells in
row-major order; the result is permutation-invariant and bit-stable per seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measurement import MeasurementRecord, OutcomeDistribution, PovmMode
from .mub import MubFamily, eta_table


def plan_samples(epsilon: float, delta: float, m_elements: int = 1) -> int:
    """Copies needed so that M element estimates all land within epsilon.

    Returns the smallest N with 4*M*exp(-N*eps^2/2) <= delta, i.e.
    ceil(2*ln(4*M/delta)/eps^2) with an exact fix-up at the integer boundary.
    """
    _check_plan_args(epsilon, delta, m_elements)

    def bound(n: int) -> float:
        return 4.0 * m_elements * math.exp(-n * epsilon**2 / 2.0)

    n = max(1, math.ceil(2.0 * math.log(4.0 * m_elements / delta) / epsilon**2))
    while bound(n) > delta:
        n += 1
    while n > 1 and bound(n - 1) <= delta:
        n -= 1
    return n


def plan_samples_general(epsilon: float, delta: float, k_bound: float, d: int,
                         m_operators: int = 1) -> int:
    """Copies for mean-value estimation of operators with coefficient bound K.

    N = floor(2*(K*(d+1)/eps)^2 * ln(4*M/delta)); with K = 1/(d+1) the count
    is independent of the dimension.
    """
    _check_plan_args(epsilon, delta, m_operators)
    if k_bound <= 0:
        raise ValueError(f"coefficient bound must be positive, got {k_bound}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    x = 2.0 * (k_bound * (d + 1) / epsilon) ** 2 * math.log(4.0 * m_operators / delta)
    return max(1, math.floor(x))


def _check_plan_args(epsilon: float, delta: float, m: int) -> None:
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if m < 1:
        raise ValueError(f"element count must be >= 1, got {m}")


def hoeffding_failure(n: int, epsilon: float) -> float:
    """The displayed failure bound 4*exp(-n*eps^2/2) for one complex element."""
    return 4.0 * math.exp(-n * epsilon**2 / 2.0)


@dataclass(frozen=True)
class SelectiveEstimate:
    """One estimated element: value, the record size behind it, and its guarantee."""

    i: int
    j: int
    value: complex
    n: int
    epsilon: float | None
    delta: float | None
    guarantee: str


def outcome_counts(record: MeasurementRecord) -> np.ndarray:
    """Multiplicity of each (basis, outcome) cell, shaped (bases, d)."""
    d = record.d
    nb = record.mode.basis_count(d)
    first = record.mode.first_basis
    flat = (record.ms.astype(np.int64) - first) * d + record.ks
    return np.bincount(flat, minlength=nb * d).reshape(nb, d)


def _element_guarantee(n: int, epsilon, delta) -> tuple:
    if epsilon is None:
        eff_delta = 0.01 if delta is None else delta
        epsilon = math.sqrt(2.0 * math.log(4.0 / eff_delta) / n)
    bound = min(1.0, hoeffding_failure(n, epsilon))
    text = f"Pr[|error| >= {epsilon:.6g}] <= {bound:.6g} (Hoeffding, n={n})"
    return epsilon, delta, text


def _check_record(record: MeasurementRecord, family: MubFamily, mode: PovmMode) -> None:
    if record.mode is not mode:
        raise ValueError(f"record mode {record.mode.value} != required {mode.value}")
    if record.d != family.d:
        raise ValueError(f"record dimension {record.d} != family dimension {family.d}")
    if record.mub_fingerprint != family.fingerprint():
        raise ValueError(
            f"record fingerprint {record.mub_fingerprint} does not match family "
            f"{family.fingerprint()}"
        )


def estimate_element(record: MeasurementRecord, family: MubFamily, i: int, j: int,
                     epsilon: float | None = None, delta: float | None = None) -> SelectiveEstimate:
    """Off-diagonal element estimate: the mean of eta_ij over the record."""
    if i == j:
        raise ValueError("i == j is a diagonal element; use estimate_diagonal")
    _check_record(record, family, PovmMode.OFFDIAG)
    counts = outcome_counts(record)
    value = complex((counts * eta_table(family, i, j)).sum() / record.n)
    eps, dlt, text = _element_guarantee(record.n, epsilon, delta)
    return SelectiveEstimate(i=i, j=j, value=value, n=record.n,
                             epsilon=eps, delta=dlt, guarantee=text)


def estimate_diagonal(record: MeasurementRecord, i: int,
                      epsilon: float | None = None, delta: float | None = None) -> SelectiveEstimate:
    """Diagonal element estimate: frequency of outcome i in the computational record."""
    if record.mode is not PovmMode.COMPUTATIONAL:
        raise ValueError(f"diagonal estimation needs a computational record, got {record.mode.value}")
    if not 0 <= i < record.d:
        raise ValueError(f"index {i} outside 0..{record.d - 1}")
    value = float(np.count_nonzero(record.ks == i)) / record.n
    eps, dlt, text = _element_guarantee(record.n, epsilon, delta)
    return SelectiveEstimate(i=i, j=i, value=value, n=record.n,
                             epsilon=eps, delta=dlt, guarantee=text)


def exact_fold(dist: OutcomeDistribution, family: MubFamily, i: int, j: int) -> complex:
    """Probability-weighted eta sum; equals rho_ij of the generating state."""
    if i == j:
        raise ValueError("i == j is a diagonal element; fold the computational distribution")
    if dist.mode is not PovmMode.OFFDIAG:
        raise ValueError(f"element folds need the offdiag distribution, got {dist.mode.value}")
    if dist.mub_fingerprint != family.fingerprint():
        raise ValueError("distribution fingerprint does not match family")
    return complex((dist.probs.reshape(family.d, family.d) * eta_table(family, i, j)).sum())


def exact_fold_diagonal(dist: OutcomeDistribution, i: int) -> float:
    """Exact diagonal: the computational distribution evaluated at outcome i."""
    if dist.mode is not PovmMode.COMPUTATIONAL:
        raise ValueError(f"diagonal folds need the computational distribution, got {dist.mode.value}")
    if not 0 <= i < dist.d:
        raise ValueError(f"index {i} outside 0..{dist.d - 1}")
    return float(dist.probs[i])


@dataclass(frozen=True)
class OperatorCoefficients:
    """An operator expressed over the basis projectors plus an identity offset.

    The represented operator is  identity_coeff * I + sum_{m,k} coeffs[m-1,k] Pi_k^(m).
    decompose_operator stores the canonical form (offset -tr A, coeffs tr[A Pi]);
    extreme_operator stores the bounded-manifold form (offset 0, coeffs K e^{i phi}).
    k_bound is the max modulus of the traceless-part coefficients, which sets the
    Hoeffding radius (d+1)*K of the mean-value estimator.
    """

    d: int
    trace: complex
    coeffs: np.ndarray = field(repr=False)  # shape (d+1, d)
    identity_coeff: complex = 0.0
    k_bound: float = 0.0

    def reconstruct(self, family: MubFamily) -> np.ndarray:
        if family.d != self.d:
            raise ValueError(f"family dimension {family.d} != coefficient dimension {self.d}")
        v = family.vectors
        out = np.einsum("mk,mki,mkj->ij", self.coeffs, v, v.conj())
        return out + self.identity_coeff * np.eye(self.d)


def decompose_operator(a: np.ndarray, family: MubFamily) -> OperatorCoefficients:
    """Canonical projector decomposition of an arbitrary square operator."""
    a = np.asarray(a, dtype=np.complex128)
    d = family.d
    if a.shape != (d, d):
        raise ValueError(f"operator shape {a.shape} != {(d, d)}")
    v = family.vectors
    coeffs = np.einsum("mkl,lx,mkx->mk", v.conj(), a, v)
    tr = complex(np.trace(a))
    k_bound = float(np.abs(coeffs - tr / d).max())
    return OperatorCoefficients(d=d, trace=tr, coeffs=coeffs,
                                identity_coeff=-tr, k_bound=k_bound)


def extreme_operator(phases: np.ndarray, k_bound: float, family: MubFamily) -> OperatorCoefficients:
    """Member of the bounded manifold: coefficients K*e^(i phi), one per (m, k)."""
    d = family.d
    phases = np.asarray(phases, dtype=np.float64)
    if phases.shape != (d + 1, d):
        raise ValueError(f"phase array shape {phases.shape} != {(d + 1, d)}")
    if k_bound <= 0:
        raise ValueError(f"coefficient bound must be positive, got {k_bound}")
    coeffs = k_bound * np.exp(1j * phases)
    return OperatorCoefficients(d=d, trace=complex(coeffs.sum()), coeffs=coeffs,
                                identity_coeff=0.0, k_bound=float(k_bound))


def estimate_mean(record: MeasurementRecord, coeffs: OperatorCoefficients) -> complex:
    """Mean value of the operator from a FULL-mode record."""
    if record.mode is not PovmMode.FULL:
        raise ValueError(f"mean estimation needs a full-mode record, got {record.mode.value}")
    if record.d != coeffs.d:
        raise ValueError(f"record dimension {record.d} != coefficient dimension {coeffs.d}")
    counts = outcome_counts(record)
    fold = (counts * coeffs.coeffs).sum() / record.n
    return complex(coeffs.identity_coeff + (coeffs.d + 1) * fold)


def exact_fold_mean(dist: OutcomeDistribution, coeffs: OperatorCoefficients) -> complex:
    """Probability-weighted mean fold; equals tr(rho A) for the generating state."""
    if dist.mode is not PovmMode.FULL:
        raise ValueError(f"mean folds need the full-mode distribution, got {dist.mode.value}")
    if dist.d != coeffs.d:
        raise ValueError(f"distribution dimension {dist.d} != coefficient dimension {coeffs.d}")
    fold = (dist.probs.reshape(coeffs.d + 1, coeffs.d) * coeffs.coeffs).sum()
    return complex(coeffs.identity_coeff + (coeffs.d + 1) * fold)
