"""Finite-dimensional C*-algebras as block-diagonal complex matrix algebras.

An algebra is a direct sum of full matrix algebras, described by its block
signature (n_1, ..., n_k).  Elements carry one complex matrix per block.
All operations are pure; elements are treated as immutable values.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import DomainError, NormalityError, SignatureMismatchError

NORMALITY_TOL = 1e-9
RANK_TOL = 1e-8


def stable_seed(*parts) -> int:
    """Derive a 64-bit seed from arbitrary parts, stable across runs."""
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big")


@dataclass(frozen=True)
class AlgebraSignature:
    """Block dimensions (n_1, ..., n_k) of a direct sum of matrix algebras."""

    blocks: tuple[int, ...]

    def __init__(self, blocks: Sequence[int]):
        blocks = tuple(int(b) for b in blocks)
        if len(blocks) < 1 or any(b < 1 for b in blocks):
            raise ValueError(f"invalid block signature {blocks}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def dim(self) -> int:
        """Complex vector-space dimension, sum of n_i^2."""
        return sum(b * b for b in self.blocks)

    @property
    def rep_dim(self) -> int:
        """Dimension of the block-diagonal matrix representation."""
        return sum(self.blocks)

    def amplify(self, m: int) -> "AlgebraSignature":
        """Signature of M_m(A): every block dimension multiplied by m."""
        if m < 1:
            raise ValueError("amplification factor must be >= 1")
        return AlgebraSignature(tuple(m * b for b in self.blocks))

    def __str__(self) -> str:
        return ",".join(str(b) for b in self.blocks)


@dataclass(frozen=True)
class Element:
    """A value of a block algebra: one complex matrix per block."""

    signature: AlgebraSignature
    blocks: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        if len(self.blocks) != len(self.signature.blocks):
            raise SignatureMismatchError("block count does not match signature")
        mats = []
        for n, b in zip(self.signature.blocks, self.blocks):
            b = np.asarray(b, dtype=np.complex128)
            if b.shape != (n, n):
                raise SignatureMismatchError(
                    f"block of shape {b.shape} does not fit dimension {n}"
                )
            b = b.copy()
            b.flags.writeable = False
            mats.append(b)
        object.__setattr__(self, "blocks", tuple(mats))

    # -- arithmetic ---------------------------------------------------------

    def _need_same(self, other: "Element"):
        if self.signature != other.signature:
            raise SignatureMismatchError(
                f"signatures differ: {self.signature} vs {other.signature}"
            )

    def __add__(self, other: "Element") -> "Element":
        self._need_same(other)
        return Element(self.signature, tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other: "Element") -> "Element":
        self._need_same(other)
        return Element(self.signature, tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def __matmul__(self, other: "Element") -> "Element":
        self._need_same(other)
        return Element(self.signature, tuple(a @ b for a, b in zip(self.blocks, other.blocks)))

    def adjoint(self) -> "Element":
        return Element(self.signature, tuple(b.conj().T for b in self.blocks))

    def scale(self, lam: complex) -> "Element":
        return Element(self.signature, tuple(lam * b for b in self.blocks))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Element):
            return NotImplemented
        return self.signature == other.signature and all(
            np.array_equal(a, b) for a, b in zip(self.blocks, other.blocks)
        )

    def __hash__(self):
        return hash((self.signature, tuple(b.tobytes() for b in self.blocks)))

    # -- metric and spectral data -------------------------------------------

    def op_norm(self) -> float:
        """Operator norm: the largest singular value over all blocks."""
        return max(
            float(np.linalg.svd(b, compute_uv=False)[0]) if b.size else 0.0
            for b in self.blocks
        )

    def dist(self, other: "Element") -> float:
        return (self - other).op_norm()

    def is_selfadjoint(self, tol: float = NORMALITY_TOL) -> bool:
        return (self - self.adjoint()).op_norm() <= tol

    def is_normal(self, tol: float = NORMALITY_TOL) -> bool:
        a, ast = self, self.adjoint()
        return (a @ ast - ast @ a).op_norm() <= tol

    def spectrum(self) -> list[np.ndarray]:
        """Eigenvalue multiset per block, sorted by (real, imag)."""
        out = []
        for b in self.blocks:
            ev = np.linalg.eigvals(b)
            out.append(ev[np.lexsort((ev.imag, ev.real))])
        return out


def zero(sig: AlgebraSignature) -> Element:
    return Element(sig, tuple(np.zeros((n, n), dtype=np.complex128) for n in sig.blocks))


def one(sig: AlgebraSignature) -> Element:
    return Element(sig, tuple(np.eye(n, dtype=np.complex128) for n in sig.blocks))


def from_blocks(sig: AlgebraSignature, blocks) -> Element:
    return Element(sig, tuple(blocks))


def arith(a: Element, b: Element, kind: str) -> Element:
    """Blockwise add/sub/mul; operands must share a signature."""
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a @ b
    raise ValueError(f"unknown arithmetic kind {kind!r}")


def adjoint(a: Element) -> Element:
    return a.adjoint()


def scale(lam: complex, a: Element) -> Element:
    return a.scale(lam)


def op_norm(a: Element) -> float:
    return a.op_norm()


def spectrum(a: Element) -> list[np.ndarray]:
    return a.spectrum()


def amplify(sig: AlgebraSignature, m: int) -> AlgebraSignature:
    return sig.amplify(m)


def embed_diag(a: Element, m: int) -> Element:
    """a tensor 1_m, an element of the amplified algebra M_m(A)."""
    if m < 1:
        raise ValueError("amplification factor must be >= 1")
    if m == 1:
        return a
    sig = a.signature.amplify(m)
    return Element(sig, tuple(np.kron(b, np.eye(m)) for b in a.blocks))


def kron_const(sig: AlgebraSignature, mat: np.ndarray) -> Element:
    """1_A tensor S for a fixed s x s scalar matrix S, in M_s(A)."""
    mat = np.asarray(mat, dtype=np.complex128)
    s = mat.shape[0]
    amp = sig.amplify(s)
    return Element(amp, tuple(np.kron(np.eye(n), mat) for n in sig.blocks))


def random_element(sig: AlgebraSignature, rng: np.random.Generator) -> Element:
    """I.i.d. standard complex Gaussian entries in every block."""
    blocks = []
    for n in sig.blocks:
        blocks.append(
            (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
            / np.sqrt(2.0)
        )
    return Element(sig, tuple(blocks))


def sample_ball(sig: AlgebraSignature, radius: float, constraint, seed: int) -> Element:
    """Deterministic random point of the closed ball, satisfying `constraint`.

    Gaussian entries, then exact constraint retraction, then ball scaling.
    The retraction lives in the evaluator module; importing it lazily keeps
    module layering acyclic.
    """
    from .evaluator import project_to_sort
    from .logic import SortSpec

    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(stable_seed("sample_ball", str(sig), radius, str(constraint), seed))
    raw = random_element(sig, rng)
    return project_to_sort(raw, SortSpec(radius=radius, constraint=constraint))


# -- functional calculus -----------------------------------------------------


@dataclass(frozen=True)
class ScalarFunction:
    """A scalar function applied through the spectral theorem.

    `lipschitz` must upper-bound |f(s)-f(t)|/|s-t| on `domain`; it is None
    when no finite constant exists there (such functions are still usable
    for evaluation, just not for modulus propagation).
    `nonunital_safe` records f(0) = 0.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    domain: tuple[float, float]
    lipschitz: float | None
    nonunital_safe: bool = False

    def lipschitz_on(self, lo: float, hi: float) -> float | None:
        """Lipschitz constant on the reachable sub-interval, if registered."""
        return self._lip_fn(lo, hi) if self._lip_fn else self.lipschitz

    _lip_fn: Callable[[float, float], float | None] | None = None


def _check_domain(values: np.ndarray, f: ScalarFunction, tol: float = 1e-8):
    lo, hi = f.domain
    if np.any(values.real < lo - tol) or np.any(values.real > hi + tol):
        raise DomainError(
            f"spectrum [{values.real.min():.4g}, {values.real.max():.4g}] "
            f"outside domain [{lo}, {hi}] of {f.name}"
        )


def apply_scalar_function(a: Element, f: ScalarFunction, sa_intent: bool = False) -> Element:
    """f(a) for normal a, via a unitary (block) diagonalization.

    Self-adjoint elements go through a Hermitian eigendecomposition so the
    result is exactly normal; declared self-adjoint intent symmetrizes
    near-self-adjoint input first.  General normal elements use the Schur
    form, which is diagonal up to roundoff for normal matrices.
    """
    if sa_intent:
        a = a.scale(0.5) + a.adjoint().scale(0.5)
    if not a.is_normal(NORMALITY_TOL * max(1.0, a.op_norm()) * 10):
        raise NormalityError("functional calculus needs a normal element")
    blocks = []
    selfadj = a.is_selfadjoint()
    for b in a.blocks:
        if selfadj:
            w, u = np.linalg.eigh(0.5 * (b + b.conj().T))
            order = np.argsort(w, kind="stable")
            w, u = w[order], u[:, order]
            _check_domain(w, f)
            blocks.append(u @ np.diag(f(w.astype(np.complex128))) @ u.conj().T)
        else:
            t, z = scipy.linalg.schur(b, output="complex")
            w = np.diag(t)
            order = np.lexsort((w.imag, w.real))
            w, z = w[order], z[:, order]
            _check_domain(w, f)
            blocks.append(z @ np.diag(f(w)) @ z.conj().T)
    return Element(a.signature, tuple(blocks))


def polar(a: Element) -> tuple[Element, Element]:
    """Polar decomposition a = v |a| with |a| = (a*a)^(1/2).

    v is unitary when a is invertible (all singular values > 1e-8) and
    otherwise the partial isometry supported on the range of |a|.
    """
    vs, ps = [], []
    for b in a.blocks:
        u, s, vh = np.linalg.svd(b)
        pos = vh.conj().T @ np.diag(s.astype(np.complex128)) @ vh
        if s.size and s.min() > RANK_TOL:
            v = u @ vh
        else:
            keep = (s > RANK_TOL * max(1.0, s[0] if s.size else 1.0)).astype(np.complex128)
            v = u @ np.diag(keep) @ vh
        vs.append(v)
        ps.append(pos)
    return Element(a.signature, tuple(vs)), Element(a.signature, tuple(ps))


# -- common scalar functions -------------------------------------------------


def _sqrt_lip(lo: float, hi: float) -> float | None:
    return None if lo <= 0 else 0.5 / np.sqrt(lo)


SQRT = ScalarFunction(
    "sqrt", lambda t: np.sqrt(np.maximum(t.real, 0.0)).astype(np.complex128),
    domain=(0.0, np.inf), lipschitz=None, nonunital_safe=True, _lip_fn=_sqrt_lip,
)


def shifted_sqrt(eta: float) -> ScalarFunction:
    """t -> sqrt(t + eta^2) on positives; operator Lipschitz 1/(2 eta)."""
    return ScalarFunction(
        f"sqrts{eta:g}",
        lambda t, e=eta: np.sqrt(np.maximum(t.real, 0.0) + e * e).astype(np.complex128),
        domain=(0.0, np.inf),
        lipschitz=0.5 / eta,
    )


def pos_part() -> ScalarFunction:
    return ScalarFunction(
        "pos", lambda t: np.maximum(t.real, 0.0).astype(np.complex128),
        domain=(-np.inf, np.inf), lipschitz=1.0, nonunital_safe=True,
    )


def shifted_pos_part(delta: float) -> ScalarFunction:
    """(t - delta)_+ used by Cuntz-style cutdowns."""
    return ScalarFunction(
        f"cut{delta:g}",
        lambda t, d=delta: np.maximum(t.real - d, 0.0).astype(np.complex128),
        domain=(-np.inf, np.inf), lipschitz=1.0, nonunital_safe=True,
    )
