"""Linear type checking with explicit derivations.

Contexts are ordered lists of ``(name, type)`` pairs.  Linear bindings must
be consumed exactly once; exponential bindings (of ``!(A -o B)`` type) may
be duplicated across context splits and discarded at leaves.  The checker
is bidirectional: promotion fires only when checking a value against a
``!`` type, the list introduction coercion fires only when checking
against a list type, and injections require either an expected type or an
annotation.

The result is a full derivation tree.  The denotational interpreter is
driven by derivations, so every rule records enough structure (the context
split, the coerced type, the promotion context) to be replayed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import syntax as S
from .syntax import (
    Abs, App, Ascribe, BangArrow, Gate, InL, InR, LetPair, LetRec, LetUnit,
    LinArrow, ListT, Match, Meas, New, Omega, Pair, QUBIT, Split, SumT,
    TensorT, Term, Type, UNIT, UnitVal, Var, free_vars, is_exponential,
    is_value,
)

Ctx = tuple  # tuple[(name, Type), ...]


class TypingError(Exception):
    def __init__(self, code: str, msg: str):
        super().__init__(f"{code}: {msg}")
        self.code = code
        self.msg = msg


@dataclass(frozen=True)
class Derivation:
    rule: str
    ctx: Ctx
    term: Term
    type: Type
    children: tuple = ()
    # rule-specific payload, e.g. the context split or a promoted context
    info: dict = field(default_factory=dict, compare=False)

    def to_text(self, indent: int = 0) -> str:
        ctx_s = ", ".join(f"{x}:{t}" for x, t in self.ctx)
        head = f"{'  ' * indent}[{self.rule}] {ctx_s} |- {S.pretty(self.term)} : {self.type}"
        return "\n".join([head] + [c.to_text(indent + 1) for c in self.children])


def ctx_lookup(ctx: Ctx, name: str) -> Optional[Type]:
    for x, t in ctx:
        if x == name:
            return t
    return None


def linear_part(ctx: Ctx) -> Ctx:
    return tuple((x, t) for x, t in ctx if not is_exponential(t))


def exponential_part(ctx: Ctx) -> Ctx:
    return tuple((x, t) for x, t in ctx if is_exponential(t))


def split_ctx(ctx: Ctx, fv_left: frozenset, fv_right: frozenset):
    """Split a context for a two-premise rule by free-variable occurrence.

    Exponential bindings go to both sides; a linear binding must occur in
    exactly one of the two free-variable sets.
    """
    left, right = [], []
    for x, t in ctx:
        if is_exponential(t):
            left.append((x, t))
            right.append((x, t))
            continue
        in_l, in_r = x in fv_left, x in fv_right
        if in_l and in_r:
            raise TypingError("LinearVarSharedAcrossSplit", f"linear variable {x} used on both sides of a split")
        if not in_l and not in_r:
            raise TypingError("LinearVarUnused", f"linear variable {x} is never used")
        (left if in_l else right).append((x, t))
    return tuple(left), tuple(right)


def _split(ctx: Ctx, fv_left: frozenset, fv_right: frozenset):
    """Context split as used by the checker; reports duplication as such."""
    try:
        return split_ctx(ctx, fv_left, fv_right)
    except TypingError as e:
        if e.code == "LinearVarSharedAcrossSplit":
            raise TypingError("LinearVarDuplicated", e.msg) from None
        raise


def _require_exponential(ctx: Ctx, what: str):
    for x, t in ctx:
        if not is_exponential(t):
            raise TypingError("LinearVarUnused", f"linear variable {x} cannot be discarded at {what}")


def _mismatch(term: Term, expected: Type, actual: Type):
    raise TypingError(
        "TypeMismatch",
        f"term {S.pretty(term)} has type {actual}, expected {expected}",
    )


def _fresh_binder(name: str, ctx: Ctx, *terms: Term) -> str:
    avoid = {x for x, _ in ctx}
    for t in terms:
        avoid |= free_vars(t)
    return S.fresh_name(name, avoid)


def _qubits_tensor(k: int) -> Type:
    t: Type = QUBIT
    for _ in range(k - 1):
        t = TensorT(t, QUBIT)
    return t


def check(ctx: Ctx, m: Term, expected: Optional[Type] = None) -> Derivation:
    """Check ``m`` against ``expected`` (or synthesise when ``None``)."""
    if isinstance(m, Ascribe):
        d = check(ctx, m.body, m.ann)
        return _finish(Derivation("ascribe", ctx, m, m.ann, (d,)), expected)

    # Promotion: the only way a term acquires a ! type.
    if isinstance(expected, BangArrow):
        if not is_value(m):
            # elimination forms propagate the expected ! type into their
            # branches, where promotion applies at the value leaves
            return _check_core(ctx, m, expected)
        # a variable already of the promoted type reuses its binding directly
        if isinstance(m, Var) and ctx_lookup(ctx, m.name) == expected:
            _require_other_linear_unused(ctx, m)
            return Derivation("ax", ctx, m, expected)
        for x, t in ctx:
            if not is_exponential(t):
                raise TypingError(
                    "PromotionUnderLinearContext",
                    f"cannot promote under linear binding {x}:{t}",
                )
        child = check(ctx, m, expected.underlying)
        return Derivation("promotion", ctx, m, expected, (child,))

    if isinstance(expected, ListT) and isinstance(m, (InL, InR)) and m.ann is None:
        return _coerce_list(ctx, m, expected)

    if isinstance(expected, ListT):
        try:
            return _check_core(ctx, m, expected)
        except TypingError:
            return _coerce_list(ctx, m, expected)

    return _check_core(ctx, m, expected)


def _coerce_list(ctx: Ctx, m: Term, expected: ListT) -> Derivation:
    unrolled = SumT(UNIT, TensorT(expected.elem, expected))
    child = check(ctx, m, unrolled)
    return Derivation("list_I", ctx, m, expected, (child,))


def _require_other_linear_unused(ctx: Ctx, m: Var):
    for y, t in ctx:
        if y != m.name and not is_exponential(t):
            raise TypingError("LinearVarUnused", f"linear variable {y} is never used")


def _finish(d: Derivation, expected: Optional[Type]) -> Derivation:
    if expected is not None and d.type != expected:
        _mismatch(d.term, expected, d.type)
    return d


def _check_core(ctx: Ctx, m: Term, expected: Optional[Type]) -> Derivation:
    match m:
        case Var(x):
            t = ctx_lookup(ctx, x)
            if t is None:
                raise TypingError("UnboundVariable", f"unbound variable {x}")
            _require_other_linear_unused(ctx, m)
            if isinstance(t, BangArrow):
                # dereliction: an exponential variable is used at its arrow type
                return _finish(Derivation("axd", ctx, m, t.underlying), expected)
            return _finish(Derivation("ax", ctx, m, t), expected)

        case UnitVal():
            _require_exponential(ctx, "()")
            return _finish(Derivation("unit_I", ctx, m, UNIT), expected)

        case Meas():
            _require_exponential(ctx, "meas")
            return _finish(Derivation("const", ctx, m, LinArrow(QUBIT, S.BIT)), expected)

        case New():
            _require_exponential(ctx, "new")
            return _finish(Derivation("const", ctx, m, LinArrow(S.BIT, QUBIT)), expected)

        case Gate(_, arity, _):
            _require_exponential(ctx, "gate")
            qt = _qubits_tensor(arity)
            return _finish(Derivation("const", ctx, m, LinArrow(qt, qt)), expected)

        case Split(a):
            _require_exponential(ctx, "split")
            t = LinArrow(ListT(a), SumT(UNIT, TensorT(a, ListT(a))))
            return _finish(Derivation("const", ctx, m, t), expected)

        case Omega(a):
            _require_exponential(ctx, "omega")
            return _finish(Derivation("omega", ctx, m, a), expected)

        case Abs(x, tx, body):
            if expected is not None:
                if not isinstance(expected, LinArrow):
                    _mismatch(m, expected, LinArrow(tx, S.UNIT))
                if expected.arg != tx:
                    _mismatch(m, expected.arg, tx)
            if ctx_lookup(ctx, x) is not None:
                x2 = _fresh_binder(x, ctx, body)
                body = S.subst(body, x, Var(x2))
                x = x2
                m = Abs(x, tx, body)
            d = check(ctx + ((x, tx),), body, expected.res if expected else None)
            return Derivation("loli_I", ctx, m, LinArrow(tx, d.type), (d,))

        case App(f, a):
            c1, c2 = _split(ctx, free_vars(f), free_vars(a))
            df = check(c1, f, None)
            if not isinstance(df.type, LinArrow):
                raise TypingError(
                    "TypeMismatch",
                    f"applied term {S.pretty(f)} has non-function type {df.type}",
                )
            da = check(c2, a, df.type.arg)
            d = Derivation("loli_E", ctx, m, df.type.res, (df, da), {"split": (c1, c2)})
            return _finish(d, expected)

        case LetUnit(s, b):
            c1, c2 = _split(ctx, free_vars(s), free_vars(b))
            ds = check(c1, s, UNIT)
            db = check(c2, b, expected)
            return Derivation("unit_E", ctx, m, db.type, (ds, db), {"split": (c1, c2)})

        case Pair(l, r):
            c1, c2 = _split(ctx, free_vars(l), free_vars(r))
            if expected is not None and not isinstance(expected, TensorT):
                # no structural retry: pairs only inhabit tensor types here
                dl = check(c1, l, None)
                dr = check(c2, r, None)
                _mismatch(m, expected, TensorT(dl.type, dr.type))
            dl = check(c1, l, expected.left if expected else None)
            dr = check(c2, r, expected.right if expected else None)
            d = Derivation("tensor_I", ctx, m, TensorT(dl.type, dr.type), (dl, dr), {"split": (c1, c2)})
            return d

        case LetPair(x, tx, y, ty, s, b):
            fv_b = free_vars(b) - {x, y}
            c1, c2 = _split(ctx, free_vars(s), fv_b)
            ds = check(c1, s, TensorT(tx, ty))
            if x == y:
                raise TypingError("TypeMismatch", f"tensor pattern binds {x} twice")
            for name in (x, y):
                if ctx_lookup(c2, name) is not None:
                    fresh = _fresh_binder(name, ctx, b)
                    b = S.subst(b, name, Var(fresh))
                    if name == x:
                        x = fresh
                    else:
                        y = fresh
                    m = LetPair(x, tx, y, ty, s, b)
            db = check(c2 + ((x, tx), (y, ty)), b, expected)
            return Derivation("tensor_E", ctx, m, db.type, (ds, db), {"split": (c1, c2)})

        case InL(b, ann) | InR(b, ann):
            is_left = isinstance(m, InL)
            target = expected if isinstance(expected, SumT) else ann
            if target is None:
                raise TypingError(
                    "CannotInfer",
                    f"injection {S.pretty(m)} needs an annotation or an expected sum type",
                )
            if not isinstance(target, SumT):
                _mismatch(m, target, SumT(UNIT, UNIT))
            db = check(ctx, b, target.left if is_left else target.right)
            rule = "plus_Il" if is_left else "plus_Ir"
            return _finish(Derivation(rule, ctx, m, target, (db,)), expected)

        case Match(s, x, tx, lb, y, ty, rb):
            fv_branches = (free_vars(lb) - {x}) | (free_vars(rb) - {y})
            c1, c2 = _split(ctx, free_vars(s), fv_branches)
            ds = check(c1, s, SumT(tx, ty))
            if ctx_lookup(c2, x) is not None:
                x2 = _fresh_binder(x, ctx, lb)
                lb = S.subst(lb, x, Var(x2))
                x = x2
            if ctx_lookup(c2, y) is not None:
                y2 = _fresh_binder(y, ctx, rb)
                rb = S.subst(rb, y, Var(y2))
                y = y2
            m = Match(s, x, tx, lb, y, ty, rb)
            dl = check(c2 + ((x, tx),), lb, expected)
            dr = check(c2 + ((y, ty),), rb, expected if expected is not None else dl.type)
            if dl.type != dr.type:
                _mismatch(m, dl.type, dr.type)
            return Derivation("plus_E", ctx, m, dl.type, (ds, dl, dr), {"split": (c1, c2)})

        case LetRec(f, ta, tb, x, body, cont, bound):
            ft = BangArrow(ta, tb)
            exp = exponential_part(ctx)
            if ctx_lookup(ctx, f) is not None or f == x:
                f2 = _fresh_binder(f, ctx, body, cont)
                body = S.subst(body, f, Var(f2))
                cont = S.subst(cont, f, Var(f2))
                f = f2
            # machine unfoldings yield `letrec f x = M in M`; detect the
            # shape before the renaming below touches only the body
            cont_is_body = cont == body
            if ctx_lookup(ctx, x) is not None:
                x2 = _fresh_binder(x, ctx, body)
                body = S.subst(body, x, Var(x2))
                x = x2
            m = LetRec(f, ta, tb, x, body, cont, bound)
            dbody = check(exp + ((f, ft), (x, ta)), body, tb)
            if expected is None and cont_is_body:
                # machine unfoldings yield `letrec f x = M in M`, whose
                # continuation is the body at the declared result type
                dcont = check(ctx + ((f, ft),), cont, tb)
            else:
                dcont = check(ctx + ((f, ft),), cont, expected)
            rule = "rec" if bound is None else "recN"
            return Derivation(rule, ctx, m, dcont.type, (dbody, dcont), {"exp": exp, "bound": bound})

    raise TypingError("CannotInfer", f"cannot type term {S.pretty(m)}")


def typecheck(m: Term, expected: Optional[Type] = None, ctx: Ctx = ()) -> Derivation:
    return check(ctx, m, expected)
