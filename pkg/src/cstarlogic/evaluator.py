"""Formula interpretation: exact quantifier-free evaluation plus sup/inf
quantifiers evaluated by deterministic multi-start projected random search.

Every quantified variable on the optimal path gets a recorded witness, and
replaying witnesses through the quantifier-free evaluator reproduces the
reported value exactly.  Results are deterministic in (seed, formula,
algebra, assignment) regardless of the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import algebra as alg
from .algebra import AlgebraSignature, Element, stable_seed
from .errors import EvalError, SortError
from .logic import (
    CONNECTIVES, Add, Adjoint, Atomic, Conn, Const, Constraint, Embed, FnApp,
    Formula, Lit, Mul, Quant, ScalarMul, SortSpec, Term, ValConst, Var,
    check_sorts, formula_range, free_vars, term_amp,
)

DIR_EXACT = "exact"
DIR_LOWER = "certified-lower"
DIR_UPPER = "certified-upper"
DIR_HEUR = "heuristic"


@dataclass(frozen=True)
class EvalConfig:
    restarts: int = 64
    iterations: int = 400
    step: float = 0.3
    decay: float = 0.97
    tolerance: float = 1e-7
    seed: int = 0
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)

    def child_budget(self) -> "EvalConfig":
        """Budget handed to a nested quantifier: restarts/4, iterations/2."""
        return replace(
            self,
            restarts=max(self.restarts // 4, 4),
            iterations=max(self.iterations // 2, 50),
        )

    def digest(self) -> str:
        return format(
            stable_seed("cfg", self.restarts, self.iterations, self.step,
                        self.decay, self.tolerance, self.seed), "016x")


@dataclass(frozen=True)
class EvalResult:
    value: float
    witnesses: dict[str, Element]
    direction: str
    samples: int
    config_hash: str


# -- exact sort retractions ----------------------------------------------------


def _ball_scale(a: Element, radius: float) -> Element:
    n = a.op_norm()
    if n <= radius:
        return a
    return a.scale(radius / n)


def _symmetrize(a: Element) -> Element:
    return (a + a.adjoint()).scale(0.5)


def project_to_sort(a: Element, s: SortSpec) -> Element:
    """Exact retraction onto the constrained ball; idempotent."""
    if s.scalar:
        z = complex(a.blocks[0][0, 0])
        if abs(z) > s.radius:
            z *= s.radius / abs(z)
        return Element(a.signature, (np.array([[z]]),))
    c = s.constraint
    if c == Constraint.NONE:
        return _ball_scale(a, s.radius)
    if c == Constraint.SA:
        return _ball_scale(_symmetrize(a), s.radius)
    if c == Constraint.POS:
        h = _symmetrize(a)
        blocks = []
        for b in h.blocks:
            w, u = np.linalg.eigh(b)
            blocks.append(u @ np.diag(np.maximum(w, 0.0).astype(np.complex128)) @ u.conj().T)
        return _ball_scale(Element(a.signature, tuple(blocks)), s.radius)
    if c == Constraint.PROJ:
        h = _symmetrize(a)
        blocks = []
        for b in h.blocks:
            w, u = np.linalg.eigh(b)
            rounded = (w >= 0.5).astype(np.complex128)
            blocks.append(u @ np.diag(rounded) @ u.conj().T)
        return Element(a.signature, tuple(blocks))
    if c == Constraint.UNIT:
        blocks = []
        for b in a.blocks:
            u, _, vh = np.linalg.svd(b)
            blocks.append(u @ vh)
        return Element(a.signature, tuple(blocks))
    if c == Constraint.PISOM:
        blocks = []
        for b in a.blocks:
            u, sv, vh = np.linalg.svd(b)
            snapped = (sv >= 0.5).astype(np.complex128)
            blocks.append(u @ np.diag(snapped) @ vh)
        return Element(a.signature, tuple(blocks))
    raise SortError(f"unknown constraint {c!r}")


# -- term evaluation -------------------------------------------------------------


def _scalar_of(e: Element) -> complex:
    return complex(e.blocks[0][0, 0])


def _eval_term(t: Term, sig: AlgebraSignature, env: dict[str, Element],
               expected: int) -> Element:
    if isinstance(t, Var):
        if t.name not in env:
            raise EvalError(f"no value assigned to variable {t.name!r}")
        v = env[t.name]
        if t.sort.scalar:
            return alg.one(sig.amplify(expected)).scale(_scalar_of(v))
        return v
    if isinstance(t, Const):
        m = t.kron_matrix()
        if m is None:
            a = sig.amplify(expected)
            return alg.one(a) if t.name == "one" else alg.zero(a)
        return alg.kron_const(sig, m)
    if isinstance(t, ValConst):
        return t.value
    if isinstance(t, (Add, Mul)):
        ca, cb = term_amp(t.left), term_amp(t.right)
        left = _eval_term(t.left, sig, env, expected if ca is None else ca)
        right = _eval_term(t.right, sig, env, expected if cb is None else cb)
        return left + right if isinstance(t, Add) else left @ right
    if isinstance(t, Adjoint):
        return _eval_term(t.child, sig, env, expected).adjoint()
    if isinstance(t, ScalarMul):
        return _eval_term(t.child, sig, env, expected).scale(t.lam)
    if isinstance(t, FnApp):
        return alg.apply_scalar_function(
            _eval_term(t.child, sig, env, expected), t.fn, sa_intent=True)
    if isinstance(t, Embed):
        inner = term_amp(t.child)
        if expected % t.factor:
            raise SortError("embedding factor does not divide the context level")
        child = _eval_term(t.child, sig, env,
                           expected // t.factor if inner is None else inner)
        return alg.embed_diag(child, t.factor)
    raise TypeError(f"not a term: {t!r}")


def eval_qf(phi: Formula, sig: AlgebraSignature, env: dict[str, Element]) -> float:
    """Exact evaluation of a quantifier-free formula at an assignment."""
    if isinstance(phi, Atomic):
        amp = term_amp(phi.term)
        return _eval_term(phi.term, sig, env, 1 if amp is None else amp).op_norm()
    if isinstance(phi, Lit):
        return phi.value
    if isinstance(phi, Conn):
        vals = [eval_qf(a, sig, env) for a in phi.args]
        return float(CONNECTIVES[phi.op].fn(*vals))
    if isinstance(phi, Quant):
        raise EvalError("formula is not quantifier-free; use eval() or replay()")
    raise TypeError(f"not a formula: {phi!r}")


# -- direction tags ---------------------------------------------------------------


def direction_of(phi: Formula) -> str:
    """Which side of the true value the search estimate certifies."""
    if isinstance(phi, (Atomic, Lit)):
        return DIR_EXACT
    if isinstance(phi, Quant):
        d = direction_of(phi.body)
        if phi.kind == "sup":
            return DIR_LOWER if d in (DIR_EXACT, DIR_LOWER) else DIR_HEUR
        return DIR_UPPER if d in (DIR_EXACT, DIR_UPPER) else DIR_HEUR
    if isinstance(phi, Conn):
        spec = CONNECTIVES[phi.op]
        dirs = [direction_of(a) for a in phi.args]
        if all(d == DIR_EXACT for d in dirs):
            return DIR_EXACT
        monos = spec.mono([formula_range(a) for a in phi.args])
        mapped = []
        for d, m in zip(dirs, monos):
            if d == DIR_EXACT:
                continue
            if m == 0 or d == DIR_HEUR:
                return DIR_HEUR
            flip = {DIR_LOWER: DIR_UPPER, DIR_UPPER: DIR_LOWER}
            mapped.append(d if m > 0 else flip[d])
        if all(d == mapped[0] for d in mapped):
            return mapped[0]
        return DIR_HEUR
    raise TypeError(f"not a formula: {phi!r}")


# -- quantifier search -------------------------------------------------------------


def _sample_sort(sig: AlgebraSignature, s: SortSpec, rng: np.random.Generator) -> Element:
    if s.scalar:
        r = s.radius * np.sqrt(rng.uniform())
        th = rng.uniform(0.0, 2.0 * np.pi)
        return Element(AlgebraSignature((1,)), (np.array([[r * np.exp(1j * th)]]),))
    raw = alg.random_element(sig.amplify(s.amplification), rng)
    return project_to_sort(raw, s)


def _perturb(x: Element, s: SortSpec, step: float, rng: np.random.Generator) -> Element:
    if s.scalar:
        z = _scalar_of(x) + step * (rng.standard_normal() + 1j * rng.standard_normal())
        e = Element(x.signature, (np.array([[z]]),))
        return project_to_sort(e, s)
    d = alg.random_element(x.signature, rng)
    return project_to_sort(x + d.scale(step), s)


class _Counter:
    __slots__ = ("n",)

    def __init__(self):
        self.n = 0


def _quant_block(phi: Quant, path: str):
    """Maximal run of same-kind quantifiers, searched jointly as one block."""
    kind = phi.kind
    names, sorts, keys = [], [], []
    node: Formula = phi
    p = path
    while isinstance(node, Quant) and node.kind == kind:
        key = f"{p}!{node.var}"
        names.append(node.var)
        sorts.append(node.sort)
        keys.append(key)
        p = key
        node = node.body
    return kind, names, sorts, keys, node, p


def _eval_rec(phi: Formula, sig: AlgebraSignature, env: dict[str, Element],
              cfg: EvalConfig, path: str, counter: _Counter,
              hints: dict[str, list[Element]], top: bool) -> tuple[float, dict]:
    if isinstance(phi, (Atomic, Lit)):
        counter.n += 1
        return eval_qf(phi, sig, env), {}
    if isinstance(phi, Conn):
        vals, wits = [], {}
        for i, a in enumerate(phi.args):
            v, w = _eval_rec(a, sig, env, cfg, f"{path}.{i}", counter, hints, top)
            vals.append(v)
            wits.update(w)
        return float(CONNECTIVES[phi.op].fn(*vals)), wits
    if isinstance(phi, Quant):
        return _search_block(phi, sig, env, cfg, path, counter, hints, top)
    raise TypeError(f"not a formula: {phi!r}")


def _run_restart(kind, names, sorts, body, body_path, sig, env, cfg, body_cfg,
                 seed_r, xs0, counter, hints):
    """One projected random-direction descent/ascent from a joint start point."""
    rng = np.random.default_rng(seed_r)
    better = (lambda a, b: a > b) if kind == "sup" else (lambda a, b: a < b)

    def obj(xs):
        inner = dict(env)
        inner.update(zip(names, xs))
        v, _ = _eval_rec(body, sig, inner, body_cfg, body_path, counter,
                         hints, False)
        return v

    xs, fx = xs0, obj(xs0)
    step = cfg.step
    for _ in range(cfg.iterations):
        cand = tuple(_perturb(x, s, step, rng) for x, s in zip(xs, sorts))
        fc = obj(cand)
        if better(fc, fx):
            xs, fx = cand, fc
        step *= cfg.decay
    return fx, xs


def _search_block(phi: Quant, sig, env, cfg, path, counter, hints, top):
    if cfg.restarts < 1 or cfg.iterations < 0:
        raise EvalError("search budget must be positive")
    kind, names, sorts, keys, body, body_path = _quant_block(phi, path)
    body_cfg = cfg.child_budget()

    starts = []
    for r in range(cfg.restarts):
        seed_r = stable_seed(cfg.seed, body_path, r)
        rng0 = np.random.default_rng(stable_seed(cfg.seed, body_path, r, "start"))
        starts.append((seed_r, tuple(_sample_sort(sig, s, rng0) for s in sorts)))
    n_hints = max((len(hints.get(k, ())) for k in keys), default=0)
    for i in range(n_hints):
        xs = []
        for k, s in zip(keys, sorts):
            hs = hints.get(k, ())
            if i < len(hs):
                xs.append(project_to_sort(hs[i], s))
            else:
                rng0 = np.random.default_rng(stable_seed(cfg.seed, k, i, "hintfill"))
                xs.append(_sample_sort(sig, s, rng0))
        starts.append((stable_seed(cfg.seed, body_path, "hint", i), tuple(xs)))

    def run(item):
        seed_r, xs0 = item
        local = _Counter()
        out = _run_restart(kind, names, sorts, body, body_path, sig, env, cfg,
                           body_cfg, seed_r, xs0, local, hints)
        return out, local.n

    if top and cfg.workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(run, starts))
    else:
        outcomes = [run(item) for item in starts]
    counter.n += sum(n for _, n in outcomes)

    best_i = 0
    best_v = outcomes[0][0][0]
    for i, ((v, _), _) in enumerate(outcomes):
        if (kind == "sup" and v > best_v) or (kind == "inf" and v < best_v):
            best_i, best_v = i, v
    best_xs = outcomes[best_i][0][1]

    # Re-evaluate the body at the winner to collect the witness tree; this
    # recomputation is what the replay contract checks against.
    inner_env = dict(env)
    inner_env.update(zip(names, best_xs))
    value, inner = _eval_rec(body, sig, inner_env, body_cfg, body_path, counter,
                             hints, False)
    wits = dict(zip(keys, best_xs))
    wits.update(inner)
    return value, wits


def eval_formula(phi: Formula, sig: AlgebraSignature,
                 assignment: dict[str, Element] | None = None,
                 cfg: EvalConfig | None = None,
                 hints: dict[str, list[Element]] | None = None) -> EvalResult:
    """Interpret the formula in the algebra with the given free-variable values."""
    cfg = cfg or EvalConfig()
    assignment = dict(assignment or {})
    check_sorts(phi, sig)
    missing = set(free_vars(phi)) - set(assignment)
    if missing:
        raise EvalError(f"assignment misses free variables {sorted(missing)}")
    counter = _Counter()
    value, wits = _eval_rec(phi, sig, assignment, cfg, "phi", counter,
                            hints or {}, True)
    return EvalResult(
        value=float(value),
        witnesses=wits,
        direction=direction_of(phi),
        samples=counter.n,
        config_hash=cfg.digest(),
    )


def replay(phi: Formula, sig: AlgebraSignature, witnesses: dict[str, Element],
           assignment: dict[str, Element] | None = None, path: str = "phi") -> float:
    """Quantifier-free re-evaluation with quantifiers replaced by witnesses."""
    env = dict(assignment or {})

    def rec(f: Formula, p: str) -> float:
        if isinstance(f, (Atomic, Lit)):
            return eval_qf(f, sig, env)
        if isinstance(f, Conn):
            vals = [rec(a, f"{p}.{i}") for i, a in enumerate(f.args)]
            return float(CONNECTIVES[f.op].fn(*vals))
        if isinstance(f, Quant):
            key = f"{p}!{f.var}"
            if key not in witnesses:
                raise EvalError(f"missing witness for {key}")
            shadowed = env.get(f.var)
            env[f.var] = witnesses[key]
            try:
                return rec(f.body, key)
            finally:
                if shadowed is None:
                    del env[f.var]
                else:
                    env[f.var] = shadowed
        raise TypeError(f"not a formula: {f!r}")

    return rec(phi, path)
