"""Continuous-logic AST: sorts, *-polynomial terms, formulas, moduli.

Formulas are norms of terms combined by a fixed catalog of connectives and
closed under sup/inf quantifiers over constrained ball sorts.  Every
connective carries enough Lipschitz data to propagate a modulus of
continuity through any formula built from the catalog.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

import numpy as np

from .algebra import Element, ScalarFunction, shifted_sqrt
from .errors import ModulusError, SortError


class Constraint(str, enum.Enum):
    NONE = "ball"
    SA = "sa"
    POS = "pos"
    PROJ = "proj"
    UNIT = "unit"
    PISOM = "pisom"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SortSpec:
    """A quantification domain: a radius-r ball with an exact constraint.

    `amplification` m places the variable in M_m(A).  `scalar` marks the
    adjoined complex-scalar sort (the closed disk of radius `radius`),
    whose values act as scalar multiples of the unit.
    """

    radius: float
    constraint: Constraint = Constraint.NONE
    amplification: int = 1
    scalar: bool = False

    def __post_init__(self):
        if self.radius <= 0:
            raise SortError("sort radius must be positive")
        if self.amplification < 1:
            raise SortError("amplification must be >= 1")
        if self.constraint in (Constraint.PROJ, Constraint.UNIT, Constraint.PISOM):
            if self.radius < 1:
                raise SortError(f"{self.constraint} sort needs radius >= 1")
        if self.scalar and (self.constraint != Constraint.NONE or self.amplification != 1):
            raise SortError("scalar sorts are plain disks")


def ball(radius: float = 1.0, amp: int = 1) -> SortSpec:
    return SortSpec(radius, Constraint.NONE, amp)


def scalar_sort(radius: float = 1.0) -> SortSpec:
    return SortSpec(radius, Constraint.NONE, 1, scalar=True)


# -- terms --------------------------------------------------------------------

# Registry of named constant matrices S, used as 1_A (x) S in amplified sorts.
KRON_CONSTANTS: dict[str, np.ndarray] = {}


def register_kron_constant(name: str, mat: np.ndarray) -> str:
    mat = np.asarray(mat, dtype=np.complex128)
    if name in KRON_CONSTANTS and not np.array_equal(KRON_CONSTANTS[name], mat):
        raise ValueError(f"constant {name!r} already registered with a different value")
    KRON_CONSTANTS[name] = mat
    return name


@dataclass(frozen=True)
class Var:
    name: str
    sort: SortSpec


@dataclass(frozen=True)
class Const:
    """`one`, `zero`, or a registered 1 (x) S constant by name."""

    name: str

    def kron_matrix(self) -> Optional[np.ndarray]:
        if self.name in ("one", "zero"):
            return None
        if self.name not in KRON_CONSTANTS:
            raise SortError(f"unregistered constant {self.name!r}")
        return KRON_CONSTANTS[self.name]


@dataclass(frozen=True)
class ValConst:
    """A concrete element bound into the term by substitution."""

    label: str
    value: Element
    amp: int = 1


@dataclass(frozen=True)
class Add:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Mul:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Adjoint:
    child: "Term"


@dataclass(frozen=True)
class ScalarMul:
    lam: complex
    child: "Term"


@dataclass(frozen=True)
class FnApp:
    fn: ScalarFunction
    child: "Term"


@dataclass(frozen=True)
class Embed:
    """Diagonal embedding child (x) 1_factor into a larger amplification."""

    child: "Term"
    factor: int


Term = Union[Var, Const, ValConst, Add, Mul, Adjoint, ScalarMul, FnApp, Embed]


def sub(a: Term, b: Term) -> Term:
    return Add(a, ScalarMul(-1.0, b))


# -- formulas -----------------------------------------------------------------


@dataclass(frozen=True)
class Atomic:
    term: Term


@dataclass(frozen=True)
class Lit:
    value: float


@dataclass(frozen=True)
class Conn:
    op: str
    args: tuple["Formula", ...]

    def __post_init__(self):
        spec = CONNECTIVES[self.op]
        if spec.arity is not None and len(self.args) != spec.arity:
            raise SortError(f"connective {self.op} takes {spec.arity} arguments")
        if spec.arity is None and len(self.args) < 2:
            raise SortError(f"connective {self.op} takes at least two arguments")


@dataclass(frozen=True)
class Quant:
    kind: str  # "sup" | "inf"
    var: str
    sort: SortSpec
    body: "Formula"

    def __post_init__(self):
        if self.kind not in ("sup", "inf"):
            raise SortError(f"bad quantifier {self.kind!r}")


Formula = Union[Atomic, Lit, Conn, Quant]


def conn(op: str, *args: Formula) -> Conn:
    return Conn(op, tuple(args))


def sup(var: str, sort: SortSpec, body: Formula) -> Quant:
    return Quant("sup", var, sort, body)


def inf(var: str, sort: SortSpec, body: Formula) -> Quant:
    return Quant("inf", var, sort, body)


def norm(term: Term) -> Atomic:
    return Atomic(term)


# -- connective catalog --------------------------------------------------------

Interval = tuple[float, float]


@dataclass(frozen=True)
class ConnSpec:
    """One registered connective with its domain, Lipschitz, and range data.

    `lip(ranges)` returns per-argument Lipschitz constants valid on the given
    reachable ranges, or None entries when no finite constant exists there.
    `mono(ranges)` gives +1/-1/0 per argument (0 = not monotone).
    """

    name: str
    arity: Optional[int]
    fn: callable
    lip: callable
    rng: callable
    mono: callable


def _hull(vals) -> Interval:
    return (min(vals), max(vals))


def _mul_range(r1: Interval, r2: Interval) -> Interval:
    prods = [a * b for a in r1 for b in r2]
    return _hull(prods)


_PSQRT_ETA = 1e-3
_DIST01_ETA = 1e-3


def _psqrt(t: float) -> float:
    return float(np.sqrt(max(t, 0.0) + _PSQRT_ETA**2) - _PSQRT_ETA)


def _dist01(t: float) -> float:
    return float(1.0 - np.sqrt(max(1.0 - 4.0 * t, 0.0) + _DIST01_ETA**2))


CONNECTIVES: dict[str, ConnSpec] = {}


def _register(spec: ConnSpec):
    CONNECTIVES[spec.name] = spec


_register(ConnSpec(
    "max", None, lambda *v: max(v),
    lip=lambda rs: [1.0] * len(rs),
    rng=lambda rs: (max(r[0] for r in rs), max(r[1] for r in rs)),
    mono=lambda rs: [1] * len(rs),
))
_register(ConnSpec(
    "min", None, lambda *v: min(v),
    lip=lambda rs: [1.0] * len(rs),
    rng=lambda rs: (min(r[0] for r in rs), min(r[1] for r in rs)),
    mono=lambda rs: [1] * len(rs),
))
_register(ConnSpec(
    "add", 2, lambda a, b: a + b,
    lip=lambda rs: [1.0, 1.0],
    rng=lambda rs: (rs[0][0] + rs[1][0], rs[0][1] + rs[1][1]),
    mono=lambda rs: [1, 1],
))
_register(ConnSpec(
    "sub", 2, lambda a, b: a - b,
    lip=lambda rs: [1.0, 1.0],
    rng=lambda rs: (rs[0][0] - rs[1][1], rs[0][1] - rs[1][0]),
    mono=lambda rs: [1, -1],
))
_register(ConnSpec(
    "dotminus", 2, lambda a, b: max(a - b, 0.0),
    lip=lambda rs: [1.0, 1.0],
    rng=lambda rs: (max(rs[0][0] - rs[1][1], 0.0), max(rs[0][1] - rs[1][0], 0.0)),
    mono=lambda rs: [1, -1],
))
_register(ConnSpec(
    "abs", 1, lambda a: abs(a),
    lip=lambda rs: [1.0],
    rng=lambda rs: ((0.0 if rs[0][0] <= 0.0 <= rs[0][1] else min(abs(rs[0][0]), abs(rs[0][1]))),
                    max(abs(rs[0][0]), abs(rs[0][1]))),
    mono=lambda rs: [1 if rs[0][0] >= 0 else (-1 if rs[0][1] <= 0 else 0)],
))
_register(ConnSpec(
    "mul", 2, lambda a, b: a * b,
    lip=lambda rs: [max(abs(rs[1][0]), abs(rs[1][1])), max(abs(rs[0][0]), abs(rs[0][1]))],
    rng=lambda rs: _mul_range(rs[0], rs[1]),
    mono=lambda rs: [1 if rs[1][0] >= 0 else (-1 if rs[1][1] <= 0 else 0),
                     1 if rs[0][0] >= 0 else (-1 if rs[0][1] <= 0 else 0)],
))
_register(ConnSpec(
    "sq", 1, lambda a: a * a,
    lip=lambda rs: [2.0 * max(abs(rs[0][0]), abs(rs[0][1]))],
    rng=lambda rs: _mul_range(rs[0], rs[0]),
    mono=lambda rs: [1 if rs[0][0] >= 0 else (-1 if rs[0][1] <= 0 else 0)],
))
_register(ConnSpec(
    "sqrt", 1, lambda a: float(np.sqrt(max(a, 0.0))),
    lip=lambda rs: [None if rs[0][0] <= 0 else 0.5 / float(np.sqrt(rs[0][0]))],
    rng=lambda rs: (float(np.sqrt(max(rs[0][0], 0.0))), float(np.sqrt(max(rs[0][1], 0.0)))),
    mono=lambda rs: [1],
))
_register(ConnSpec(
    "psqrt", 1, _psqrt,
    lip=lambda rs: [0.5 / float(np.sqrt(max(rs[0][0], 0.0) + _PSQRT_ETA**2))],
    rng=lambda rs: (_psqrt(rs[0][0]), _psqrt(rs[0][1])),
    mono=lambda rs: [1],
))
_register(ConnSpec(
    "dist01", 1, _dist01,
    lip=lambda rs: [2.0 / float(np.sqrt(max(1.0 - 4.0 * rs[0][1], 0.0) + _DIST01_ETA**2))],
    rng=lambda rs: (_dist01(rs[0][0]), _dist01(rs[0][1])),
    mono=lambda rs: [1],
))


# -- binding analysis ----------------------------------------------------------


def _term_vars(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, (Const, ValConst)):
        return
    elif isinstance(t, (Add, Mul)):
        yield from _term_vars(t.left)
        yield from _term_vars(t.right)
    elif isinstance(t, (Adjoint, ScalarMul, FnApp, Embed)):
        yield from _term_vars(t.child)
    else:
        raise TypeError(f"not a term: {t!r}")


def _collect_free(phi: Formula, bound: frozenset, out: dict):
    if isinstance(phi, Atomic):
        for v in _term_vars(phi.term):
            if v.name in bound:
                continue
            if v.name in out and out[v.name] != v.sort:
                raise SortError(f"variable {v.name!r} used with two different sorts")
            out[v.name] = v.sort
    elif isinstance(phi, Lit):
        return
    elif isinstance(phi, Conn):
        for a in phi.args:
            _collect_free(a, bound, out)
    elif isinstance(phi, Quant):
        _collect_free(phi.body, bound | {phi.var}, out)
    else:
        raise TypeError(f"not a formula: {phi!r}")


def free_vars(phi: Formula) -> dict[str, SortSpec]:
    """Free variables with their sorts; conflicting sorts raise SortError."""
    out: dict[str, SortSpec] = {}
    _collect_free(phi, frozenset(), out)
    return out


def bound_sorts_consistent(phi: Formula, env: Optional[dict] = None):
    """Check that every occurrence of a bound variable matches its binder."""
    env = env or {}
    if isinstance(phi, Atomic):
        for v in _term_vars(phi.term):
            if v.name in env and v.sort != env[v.name]:
                raise SortError(f"occurrence of {v.name!r} disagrees with its binder")
    elif isinstance(phi, Conn):
        for a in phi.args:
            bound_sorts_consistent(a, env)
    elif isinstance(phi, Quant):
        bound_sorts_consistent(phi.body, {**env, phi.var: phi.sort})


# -- sort checking --------------------------------------------------------------

WILD = None  # amplification of scalar-like leaves, adapts to context


def _unify_amp(a, b, what: str):
    if a is WILD:
        return b
    if b is WILD or a == b:
        return a
    raise SortError(f"amplification mismatch in {what}: M_{a}(A) vs M_{b}(A)")


def term_amp(t: Term) -> Optional[int]:
    """Amplification level of a term; None when it adapts (scalars, one, zero)."""
    if isinstance(t, Var):
        return WILD if t.sort.scalar else t.sort.amplification
    if isinstance(t, Const):
        m = t.kron_matrix()
        return WILD if m is None else m.shape[0]
    if isinstance(t, ValConst):
        return t.amp
    if isinstance(t, Add):
        return _unify_amp(term_amp(t.left), term_amp(t.right), "sum")
    if isinstance(t, Mul):
        return _unify_amp(term_amp(t.left), term_amp(t.right), "product")
    if isinstance(t, (Adjoint, ScalarMul, FnApp)):
        return term_amp(t.child)
    if isinstance(t, Embed):
        inner = term_amp(t.child)
        return (1 if inner is WILD else inner) * t.factor
    raise TypeError(f"not a term: {t!r}")


def is_selfadjoint_term(t: Term) -> bool:
    """Conservative structural self-adjointness check."""
    if isinstance(t, Var):
        return (not t.sort.scalar) and t.sort.constraint in (
            Constraint.SA, Constraint.POS, Constraint.PROJ)
    if isinstance(t, Const):
        m = t.kron_matrix()
        if m is None:
            return True
        return bool(np.allclose(m, m.conj().T, atol=0))
    if isinstance(t, ValConst):
        return t.value.is_selfadjoint(0.0)
    if isinstance(t, Add):
        if is_selfadjoint_term(t.left) and is_selfadjoint_term(t.right):
            return True
        return t.right == Adjoint(t.left) or t.left == Adjoint(t.right)
    if isinstance(t, Mul):
        if t.left == Adjoint(t.right) or t.right == Adjoint(t.left):
            return True
        return False
    if isinstance(t, Adjoint):
        return is_selfadjoint_term(t.child)
    if isinstance(t, ScalarMul):
        return t.lam.imag == 0 and is_selfadjoint_term(t.child)
    if isinstance(t, FnApp):
        return is_selfadjoint_term(t.child)
    if isinstance(t, Embed):
        return is_selfadjoint_term(t.child)
    raise TypeError(f"not a term: {t!r}")


@dataclass(frozen=True)
class Annotated:
    """A formula together with the data established by sort checking."""

    formula: Formula
    free: dict[str, SortSpec] = field(compare=False)
    value_range: Interval = (0.0, 0.0)


def _check_terms(phi: Formula, sig_dims: tuple[int, ...]):
    if isinstance(phi, Atomic):
        term_amp(phi.term)  # raises on amplification mixing
        for node in _walk_term(phi.term):
            if isinstance(node, FnApp) and not is_selfadjoint_term(node.child):
                raise SortError(
                    f"functional calculus argument is not declared self-adjoint "
                    f"in {node.fn.name}[...]")
    elif isinstance(phi, Conn):
        for a in phi.args:
            _check_terms(a, sig_dims)
    elif isinstance(phi, Quant):
        _check_terms(phi.body, sig_dims)


def _walk_term(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, (Add, Mul)):
        yield from _walk_term(t.left)
        yield from _walk_term(t.right)
    elif isinstance(t, (Adjoint, ScalarMul, FnApp, Embed)):
        yield from _walk_term(t.child)


def check_sorts(phi: Formula, ambient) -> Annotated:
    """Validate sorts against an ambient signature and annotate the formula."""
    free = free_vars(phi)
    bound_sorts_consistent(phi)
    _check_terms(phi, tuple(ambient.blocks) if ambient is not None else ())
    lo, hi = formula_range(phi)
    return Annotated(phi, free, (lo, hi))


# -- moduli ----------------------------------------------------------------------


def term_norm_bound(t: Term) -> float:
    """Upper bound for the operator norm over all sort-respecting assignments."""
    if isinstance(t, Var):
        return t.sort.radius
    if isinstance(t, Const):
        m = t.kron_matrix()
        if m is None:
            return 0.0 if t.name == "zero" else 1.0
        return float(np.linalg.svd(m, compute_uv=False)[0])
    if isinstance(t, ValConst):
        return t.value.op_norm()
    if isinstance(t, Add):
        return term_norm_bound(t.left) + term_norm_bound(t.right)
    if isinstance(t, Mul):
        return term_norm_bound(t.left) * term_norm_bound(t.right)
    if isinstance(t, Adjoint):
        return term_norm_bound(t.child)
    if isinstance(t, ScalarMul):
        return abs(t.lam) * term_norm_bound(t.child)
    if isinstance(t, FnApp):
        lo, hi = _spectral_range(t.child)
        return _fn_abs_bound(t.fn, lo, hi)
    if isinstance(t, Embed):
        return term_norm_bound(t.child)
    raise TypeError(f"not a term: {t!r}")


def _spectral_range(t: Term) -> Interval:
    """Reachable spectral interval of a self-adjoint-valued term."""
    b = term_norm_bound(t)
    if isinstance(t, Var) and t.sort.constraint in (Constraint.POS, Constraint.PROJ):
        return (0.0, min(b, 1.0) if t.sort.constraint == Constraint.PROJ else b)
    if isinstance(t, Mul) and (t.left == Adjoint(t.right) or t.right == Adjoint(t.left)):
        return (0.0, b)
    if isinstance(t, Add):
        l1 = _spectral_range(t.left)
        l2 = _spectral_range(t.right)
        if is_selfadjoint_term(t.left) and is_selfadjoint_term(t.right):
            return (l1[0] + l2[0], l1[1] + l2[1])
    if isinstance(t, ScalarMul) and t.lam.imag == 0:
        lo, hi = _spectral_range(t.child)
        vals = sorted((t.lam.real * lo, t.lam.real * hi))
        return (vals[0], vals[1])
    return (-b, b)


def _fn_abs_bound(fn: ScalarFunction, lo: float, hi: float) -> float:
    lo = max(lo, fn.domain[0])
    hi = min(hi, fn.domain[1])
    if hi < lo:
        hi = lo
    grid = np.linspace(lo, min(hi, lo + 1e6), 257)
    return float(np.max(np.abs(fn.fn(grid.astype(np.complex128)))))


def term_lipschitz(t: Term, var: str) -> float:
    """Operator-norm Lipschitz bound of the term map wrt one free variable."""
    if isinstance(t, Var):
        return 1.0 if t.name == var else 0.0
    if isinstance(t, (Const, ValConst)):
        return 0.0
    if isinstance(t, Add):
        return term_lipschitz(t.left, var) + term_lipschitz(t.right, var)
    if isinstance(t, Mul):
        return (term_lipschitz(t.left, var) * term_norm_bound(t.right)
                + term_norm_bound(t.left) * term_lipschitz(t.right, var))
    if isinstance(t, Adjoint):
        return term_lipschitz(t.child, var)
    if isinstance(t, ScalarMul):
        return abs(t.lam) * term_lipschitz(t.child, var)
    if isinstance(t, FnApp):
        inner = term_lipschitz(t.child, var)
        if inner == 0.0:
            return 0.0
        lo, hi = _spectral_range(t.child)
        lf = t.fn.lipschitz_on(lo, hi)
        if lf is None:
            raise ModulusError(
                f"{t.fn.name} has no Lipschitz bound on spectral range [{lo:g}, {hi:g}]")
        return lf * inner
    if isinstance(t, Embed):
        return term_lipschitz(t.child, var)
    raise TypeError(f"not a term: {t!r}")


def _modulus(phi: Formula, var: str) -> tuple[float, Interval]:
    if isinstance(phi, Atomic):
        return term_lipschitz(phi.term, var), (0.0, term_norm_bound(phi.term))
    if isinstance(phi, Lit):
        return 0.0, (phi.value, phi.value)
    if isinstance(phi, Conn):
        spec = CONNECTIVES[phi.op]
        parts = [_modulus(a, var) for a in phi.args]
        ranges = [p[1] for p in parts]
        weights = spec.lip(ranges)
        total = 0.0
        for (l, _), w in zip(parts, weights):
            if l == 0.0:
                continue
            if w is None:
                raise ModulusError(
                    f"connective {spec.name} is not Lipschitz on range {ranges}")
            total += w * l
        return total, spec.rng(ranges)
    if isinstance(phi, Quant):
        inner_l, inner_r = _modulus(phi.body, var)
        if phi.var == var:
            return 0.0, inner_r
        return inner_l, inner_r
    raise TypeError(f"not a formula: {phi!r}")


def lipschitz_modulus(phi: Formula, var: str) -> float:
    """A Lipschitz constant for phi as a function of the free variable `var`."""
    if var not in free_vars(phi):
        raise SortError(f"{var!r} is not free in the formula")
    return _modulus(phi, var)[0]


def formula_range(phi: Formula) -> Interval:
    return _modulus(phi, "\x00never-a-variable")[1]


# -- substitution -----------------------------------------------------------------


def constraint_defect(a: Element, s: SortSpec) -> float:
    """How far the element is from satisfying the sort constraint exactly."""
    from . import algebra as alg

    d = 0.0
    if s.constraint == Constraint.SA:
        d = (a - a.adjoint()).op_norm()
    elif s.constraint == Constraint.POS:
        sa = (a - a.adjoint()).op_norm()
        ev = min((np.linalg.eigvalsh(0.5 * (b + b.conj().T)).min() for b in a.blocks))
        d = sa + max(0.0, -float(ev))
    elif s.constraint == Constraint.PROJ:
        d = (a @ a - a).op_norm() + (a - a.adjoint()).op_norm()
    elif s.constraint == Constraint.UNIT:
        i = alg.one(a.signature)
        d = (a.adjoint() @ a - i).op_norm() + (a @ a.adjoint() - i).op_norm()
    elif s.constraint == Constraint.PISOM:
        p = a @ a.adjoint()
        d = (p @ p - p).op_norm() + (p - p.adjoint()).op_norm()
    over = max(0.0, a.op_norm() - s.radius)
    return d + over


def _subst_term(t: Term, var: str, node: ValConst) -> Term:
    if isinstance(t, Var):
        return node if t.name == var else t
    if isinstance(t, (Const, ValConst)):
        return t
    if isinstance(t, Add):
        return Add(_subst_term(t.left, var, node), _subst_term(t.right, var, node))
    if isinstance(t, Mul):
        return Mul(_subst_term(t.left, var, node), _subst_term(t.right, var, node))
    if isinstance(t, Adjoint):
        return Adjoint(_subst_term(t.child, var, node))
    if isinstance(t, ScalarMul):
        return ScalarMul(t.lam, _subst_term(t.child, var, node))
    if isinstance(t, FnApp):
        return FnApp(t.fn, _subst_term(t.child, var, node))
    if isinstance(t, Embed):
        return Embed(_subst_term(t.child, var, node), t.factor)
    raise TypeError(f"not a term: {t!r}")


def _subst(phi: Formula, var: str, node: ValConst) -> Formula:
    if isinstance(phi, Atomic):
        return Atomic(_subst_term(phi.term, var, node))
    if isinstance(phi, Lit):
        return phi
    if isinstance(phi, Conn):
        return Conn(phi.op, tuple(_subst(a, var, node) for a in phi.args))
    if isinstance(phi, Quant):
        if phi.var == var:
            return phi  # shadowed
        return Quant(phi.kind, phi.var, phi.sort, _subst(phi.body, var, node))
    raise TypeError(f"not a formula: {phi!r}")


def substitute(phi: Formula, var: str, value: Element, tol: float = 1e-9) -> Formula:
    """Capture-free substitution of a concrete element for a free variable."""
    sorts = free_vars(phi)
    if var not in sorts:
        raise SortError(f"{var!r} is not free in the formula")
    s = sorts[var]
    if s.scalar:
        if value.signature.blocks != (1,):
            raise SortError("scalar variables take 1x1 values")
        if abs(value.blocks[0][0, 0]) > s.radius + tol:
            raise SortError("scalar value outside its disk")
    else:
        defect = constraint_defect(value, s)
        if defect > tol:
            raise SortError(
                f"value violates sort of {var!r} by {defect:.3g} (> {tol:g})")
    node = ValConst(var, value, 1 if s.scalar else s.amplification)
    return _subst(phi, var, node)


# -- bound-variable normalization --------------------------------------------------


def _rename_term(t: Term, env: dict[str, str]) -> Term:
    if isinstance(t, Var):
        return Var(env.get(t.name, t.name), t.sort)
    if isinstance(t, (Const, ValConst)):
        return t
    if isinstance(t, Add):
        return Add(_rename_term(t.left, env), _rename_term(t.right, env))
    if isinstance(t, Mul):
        return Mul(_rename_term(t.left, env), _rename_term(t.right, env))
    if isinstance(t, Adjoint):
        return Adjoint(_rename_term(t.child, env))
    if isinstance(t, ScalarMul):
        return ScalarMul(t.lam, _rename_term(t.child, env))
    if isinstance(t, FnApp):
        return FnApp(t.fn, _rename_term(t.child, env))
    if isinstance(t, Embed):
        return Embed(_rename_term(t.child, env), t.factor)
    raise TypeError(f"not a term: {t!r}")


def _rename(phi: Formula, env: dict[str, str], counter: list[int]) -> Formula:
    if isinstance(phi, Atomic):
        return Atomic(_rename_term(phi.term, env))
    if isinstance(phi, Lit):
        return phi
    if isinstance(phi, Conn):
        return Conn(phi.op, tuple(_rename(a, env, counter) for a in phi.args))
    if isinstance(phi, Quant):
        fresh = f"x{counter[0]}"
        counter[0] += 1
        inner = {**env, phi.var: fresh}
        return Quant(phi.kind, fresh, phi.sort, _rename(phi.body, inner, counter))
    raise TypeError(f"not a formula: {phi!r}")


def rename_bound(phi: Formula) -> Formula:
    """Rename bound variables to x0, x1, ... in binding order."""
    return _rename(phi, {}, [0])


def alpha_equal(a: Formula, b: Formula) -> bool:
    return rename_bound(a) == rename_bound(b)
