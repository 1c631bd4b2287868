"""Linear type checker: rules, context splitting, errors, uniqueness."""

from pathlib import Path

import pytest

import qlam.parser as P
import qlam.syntax as S
import qlam.typecheck as T

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"


def load(name: str) -> S.Term:
    return P.parse_term((PROGRAMS / f"{name}.qlam").read_text())


def err_of(fn):
    with pytest.raises(T.TypingError) as exc:
        fn()
    return str(exc.value).split(":")[0]


def test_teleport_judgement():
    want = P.parse_type(
        "!(unit -o (qubit -o bit * bit) * (bit * bit -o qubit))")
    d = T.typecheck(load("teleport"))
    assert d.type == want


def test_qlist_type():
    term = P.parse_term((PROGRAMS / "qlist.qlam").read_text())
    d = T.typecheck(term, P.parse_type("qubit -o list[qubit]"))
    assert d.type == P.parse_type("qubit -o list[qubit]")


def test_linear_duplication_rejected():
    dup = S.Pair(S.Var("x"), S.Var("x"))
    assert err_of(lambda: T.typecheck(dup, None, (("x", S.QUBIT),))) == \
        "LinearVarDuplicated"


def test_linear_discard_rejected():
    drop = S.Abs("x", S.QUBIT, S.UnitVal())
    assert err_of(lambda: T.typecheck(drop)) == "LinearVarUnused"


def test_unbound_variable():
    assert err_of(lambda: T.typecheck(S.Var("nope"))) == "UnboundVariable"


def test_exponential_duplication_allowed():
    # a !-typed variable may be used twice
    ft = S.BangArrow(S.QUBIT, S.QUBIT)
    term = S.Abs("f", ft, S.Pair(S.App(S.Var("f"), S.App(S.New(), S.ff())),
                                 S.App(S.Var("f"), S.App(S.New(), S.ff()))))
    d = T.typecheck(term)
    assert d.type == S.LinArrow(ft, S.TensorT(S.QUBIT, S.QUBIT))


def test_exponential_weakening_allowed():
    ft = S.BangArrow(S.QUBIT, S.QUBIT)
    term = S.Abs("f", ft, S.UnitVal())
    assert T.typecheck(term).type == S.LinArrow(ft, S.UNIT)


def test_promotion_requires_exponential_context():
    # a lambda with a free linear variable cannot be promoted
    term = S.Abs("x", S.QUBIT,
                 S.Ascribe(S.Abs("y", S.UNIT,
                                 S.LetUnit(S.Var("y"), S.Var("x"))),
                           S.BangArrow(S.UNIT, S.QUBIT)))
    assert err_of(lambda: T.typecheck(term)) == "PromotionUnderLinearContext"


def test_promotion_of_value_in_exponential_context():
    inner = S.Abs("x", S.QUBIT, S.Var("x"))
    d = T.typecheck(inner, S.BangArrow(S.QUBIT, S.QUBIT))
    assert d.rule == "promotion"


def test_letrec_binds_bang():
    # the recursion variable is bound at the ! type (and derelicts on use)
    term = P.parse_term("letrec f(x:unit):unit = f x in f")
    d = T.typecheck(term, S.BangArrow(S.UNIT, S.UNIT))
    assert d.type == S.BangArrow(S.UNIT, S.UNIT)
    # synthesis without an expected type yields the derelicted arrow
    assert T.typecheck(term).type == S.LinArrow(S.UNIT, S.UNIT)


def test_derivation_unique():
    a = T.typecheck(load("teleport"))
    b = T.typecheck(load("teleport"))
    assert a == b


def test_derivation_serializes():
    text = T.typecheck(load("cointoss")).to_text()
    assert "meas" in text or "const" in text
    assert "|-" in text or ":" in text


def test_split_duplicates_exponentials():
    ft = S.BangArrow(S.UNIT, S.UNIT)
    term = S.Pair(S.App(S.Var("f"), S.UnitVal()),
                  S.App(S.Var("f"), S.UnitVal()))
    d = T.typecheck(term, None, (("f", ft),))
    c1, c2 = d.info["split"]
    assert ("f", ft) in c1 and ("f", ft) in c2


def test_omega_types_anywhere():
    d = T.typecheck(S.Omega(S.QUBIT), S.QUBIT)
    assert d.rule == "omega"


def test_bounded_letrec_rule():
    term = P.parse_term("letrec f(x:unit):unit = f x in f ()")
    bounded = S.lower_approximant(term, 2)
    d = T.typecheck(bounded, S.UNIT)
    node = d
    while node.rule != "recN":
        node = node.children[-1]
    assert node.info["bound"] == 2
