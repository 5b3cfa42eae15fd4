"""Construction and verification of maximal mutually unbiased basis families.

A family in dimension d = p^n holds d+1 orthonormal bases whose cross-basis
overlaps all have squared magnitude 1/d.  Basis m=1 is always the
computational basis; the remaining d bases come from additive characters:

* odd p: basis a, vector b has coefficients exp(2*pi*i/p)^tr(a*x^2 + b*x)
  / sqrt(d) over the field GF(p^n) (for n = 1 this is the quadratic phase
  omega^(a*l^2 + b*l)),
* p = 2: basis a, vector b has coefficients i^tr((a + 2b)*x) / sqrt(d) over
  the Teichmueller set of the Galois ring GR(4, n) (for n = 1 these are the
  Pauli X and Y eigenbases).

Any family passing `verify_mub` is equally valid; this particular one is
fixed so that measurement records are reproducible across builds.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .fields import MAX_FIELD_ORDER, GaloisRing4, build_field, factor_prime_power


@dataclass(frozen=True)
class MubFamily:
    """d+1 mutually unbiased orthonormal bases, m=1 computational.

    vectors[m-1, k, l] is the l-th computational coefficient of vector k of
    basis m (all indices stored 0-based; the basis label m is 1-based in the
    public API because m=1 is special).  Immutable; safe to share.
    """

    d: int
    vectors: np.ndarray = field(repr=False)
    convention: str = "m1-computational"

    def basis(self, m: int) -> np.ndarray:
        """Rows are the d vectors of basis m (1 <= m <= d+1)."""
        self._check_m(m)
        return self.vectors[m - 1]

    def vector(self, k: int, m: int) -> np.ndarray:
        self._check_m(m)
        self._check_index(k, "k")
        return self.vectors[m - 1, k]

    def alpha(self, l: int, k: int, m: int) -> complex:
        """Unit-modulus phase: the l-th coefficient of |k,m> scaled by sqrt(d)."""
        if m == 1:
            raise ValueError("basis m=1 is the computational basis and has no phases")
        self._check_m(m)
        self._check_index(k, "k")
        self._check_index(l, "l")
        return complex(np.sqrt(self.d) * self.vectors[m - 1, k, l])

    def projector(self, k: int, m: int) -> np.ndarray:
        v = self.vector(k, m)
        return np.outer(v, v.conj())

    def fingerprint(self) -> str:
        """64-bit hash of the coefficients rounded to 12 decimals, as 16 hex chars."""
        re = np.round(self.vectors.real, 12) + 0.0
        im = np.round(self.vectors.imag, 12) + 0.0
        data = np.ascontiguousarray(np.stack([re, im]), dtype="<f8").tobytes()
        return hashlib.sha256(data).digest()[:8].hex()

    def _check_m(self, m: int) -> None:
        if not 1 <= m <= self.d + 1:
            raise ValueError(f"basis label m={m} outside 1..{self.d + 1}")

    def _check_index(self, i: int, name: str) -> None:
        if not 0 <= i < self.d:
            raise ValueError(f"index {name}={i} outside 0..{self.d - 1}")


def build_mub(d: int, max_dim: int = MAX_FIELD_ORDER) -> MubFamily:
    """Build the maximal MUB family in prime-power dimension d.

    Deterministic for fixed d.  Raises ValueError for dimensions that are
    not prime powers (d = 6, 10, ...), where no maximal family is known.
    """
    pn = factor_prime_power(d)
    if pn is None:
        raise ValueError(f"dimension {d} is not a prime power; maximal MUB unsupported")
    if d > max_dim:
        raise ValueError(f"dimension {d} exceeds maximum {max_dim}")
    p, n = pn

    vectors = np.zeros((d + 1, d, d), dtype=np.complex128)
    vectors[0] = np.eye(d)
    if p == 2:
        exps = GaloisRing4(n).phase_exponents()  # values in Z4
        vectors[1:] = 1j ** exps.astype(np.float64) / np.sqrt(d)
    else:
        f = build_field(p, n)
        idx = np.arange(d)
        sq = f.mul_table[idx, idx]  # x^2 for each element
        tr_ax2 = f.trace_table[f.mul_table[idx[:, None], sq[None, :]]]  # [a, x]
        tr_bx = f.trace_table[f.mul_table]  # [b, x]
        exps = (tr_ax2[:, None, :] + tr_bx[None, :, :]) % p  # [a, b, x]
        omega = np.exp(2j * np.pi / p)
        vectors[1:] = omega ** exps / np.sqrt(d)
    vectors.setflags(write=False)
    return MubFamily(d=d, vectors=vectors)


@dataclass(frozen=True)
class MubReport:
    """verify_mub output: worst deviations and the pair that attains the worst one."""

    d: int
    max_orthonormality_dev: float
    max_unbiasedness_dev: float
    passed: bool
    worst_pair: tuple  # ((m, k), (n, l)), 1-based basis labels, 0-based vectors

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"mub d={self.d}: {status} "
            f"(orthonormality dev {self.max_orthonormality_dev:.3e}, "
            f"unbiasedness dev {self.max_unbiasedness_dev:.3e}, "
            f"worst pair {self.worst_pair})"
        )


def verify_mub(family: MubFamily, tol: float = 1e-10) -> MubReport:
    """Check orthonormality of each basis and 1/d cross-basis overlaps.

    Passes iff both worst-case deviations are <= tol.
    """
    d = family.d
    w = family.vectors.reshape((d + 1) * d, d)
    gram = w @ w.conj().T
    gram = gram.reshape(d + 1, d, d + 1, d)

    eye = np.eye(d)
    ortho_dev = np.zeros((d + 1, d, d + 1, d))
    unbias_dev = np.zeros_like(ortho_dev)
    for m in range(d + 1):
        ortho_dev[m, :, m, :] = np.abs(gram[m, :, m, :] - eye)
    cross = np.ones((d + 1, d + 1), dtype=bool)
    np.fill_diagonal(cross, False)
    mm, nn = np.nonzero(cross)
    unbias_dev[mm, :, nn, :] = np.abs(np.abs(gram[mm, :, nn, :]) ** 2 - 1.0 / d)

    max_ortho = float(ortho_dev.max())
    max_unbias = float(unbias_dev.max())
    worst_arr = ortho_dev if max_ortho >= max_unbias else unbias_dev
    m, k, n, l = np.unravel_index(int(worst_arr.argmax()), worst_arr.shape)
    return MubReport(
        d=d,
        max_orthonormality_dev=max_ortho,
        max_unbiasedness_dev=max_unbias,
        passed=max_ortho <= tol and max_unbias <= tol,
        worst_pair=((int(m) + 1, int(k)), (int(n) + 1, int(l))),
    )


def eta(family: MubFamily, i: int, j: int, k: int, m: int) -> complex:
    """Unit-modulus weight alpha_i * conj(alpha_j) for outcome (k, m), m >= 2."""
    if m == 1:
        raise ValueError("eta is undefined for the computational basis m=1")
    family._check_m(m)
    for name, v in (("i", i), ("j", j), ("k", k)):
        family._check_index(v, name)
    vec = family.vectors[m - 1, k]
    return complex(family.d * vec[i] * vec[j].conjugate())


def eta_table(family: MubFamily, i: int, j: int) -> np.ndarray:
    """All eta weights at once: array E[m-2, k] over bases m = 2 .. d+1."""
    for name, v in (("i", i), ("j", j)):
        family._check_index(v, name)
    v = family.vectors[1:]
    return family.d * v[:, :, i] * v[:, :, j].conj()


def mub_to_json(family: MubFamily) -> dict:
    """JSON-ready dict: {d, bases: [[[ [re, im] per coeff ] per vector ] per basis]}."""
    bases = [
        [[[float(c.real), float(c.imag)] for c in vec] for vec in basis]
        for basis in family.vectors
    ]
    return {"d": family.d, "bases": bases}


def mub_from_json(obj: dict) -> MubFamily:
    d = int(obj["d"])
    arr = np.asarray(obj["bases"], dtype=np.float64)
    if arr.shape != (d + 1, d, d, 2):
        raise ValueError(f"malformed MUB JSON: expected shape {(d + 1, d, d, 2)}, got {arr.shape}")
    vectors = arr[..., 0] + 1j * arr[..., 1]
    vectors.setflags(write=False)
    return MubFamily(d=d, vectors=vectors)


def save_mub(family: MubFamily, path) -> None:
    with open(path, "w") as fh:
        json.dump(mub_to_json(family), fh)


def load_mub(path) -> MubFamily:
    with open(path) as fh:
        return mub_from_json(json.load(fh))
