"""Denotational semantics: constants, structural rules, fixpoints."""

from pathlib import Path

import numpy as np
import pytest

import qlam.cpm as C
import qlam.denote as D
import qlam.machine as M
import qlam.parser as P
import qlam.qstate as Q
import qlam.syntax as S
import qlam.typecheck as T

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"
CFG = D.TruncationConfig(list_max=3, bang_max=2)


def den(term, expected=None, ctx=()):
    return D.denote(T.typecheck(term, expected, ctx), CFG)


def scalar_entries(mor):
    src0 = mor.src.labels()[0]
    out = {}
    for dl in mor.dst.labels():
        e = mor.entry(src0, dl)
        if e.shape == (1, 1):
            out[dl] = complex(e[0, 0])
    return out


def test_tt_denotation():
    got = scalar_entries(den(S.tt(), S.BIT))
    assert got[("inj", 1, ("star",))] == pytest.approx(1.0)
    assert got.get(("inj", 0, ("star",)), 0.0) == pytest.approx(0.0)


def test_unit_denotation():
    mor = den(S.UnitVal(), S.UNIT)
    assert complex(mor.entry(("star",), ("star",))[0, 0]) == pytest.approx(1.0)


def test_new_denotation():
    # new sends the bit (p, q) to the density p|0><0| + q|1><1|
    mor = den(S.App(S.New(), S.Var("b")), S.QUBIT, (("b", S.BIT),))
    e0 = mor.entry(("inj", 0, ("star",)), ("star",))
    e1 = mor.entry(("inj", 1, ("star",)), ("star",))
    assert np.allclose(e0.ravel(), [1, 0, 0, 0])
    assert np.allclose(e1.ravel(), [0, 0, 0, 1])


def test_meas_denotation():
    mor = den(S.App(S.Meas(), S.Var("x")), S.BIT, (("x", S.QUBIT),))
    e0 = mor.entry(("star",), ("inj", 0, ("star",)))
    e1 = mor.entry(("star",), ("inj", 1, ("star",)))
    assert np.allclose(e0.ravel(), [1, 0, 0, 0])
    assert np.allclose(e1.ravel(), [0, 0, 0, 1])


def test_gate_denotation_is_conjugation():
    x = S.STANDARD_GATES["X"].as_array()
    mor = den(S.App(S.STANDARD_GATES["X"], S.Var("q")), S.QUBIT,
              (("q", S.QUBIT),))
    got = mor.entry(("star",), ("star",))
    assert np.allclose(got, np.kron(x.conj(), x))


def test_cointoss_denotation():
    term = P.parse_term((PROGRAMS / "cointoss.qlam").read_text())
    got = scalar_entries(den(term, S.BIT))
    assert got[("inj", 0, ("star",))] == pytest.approx(0.5, abs=1e-12)
    assert got[("inj", 1, ("star",))] == pytest.approx(0.5, abs=1e-12)


def test_identity_function():
    mor = den(S.Abs("x", S.QUBIT, S.Var("x")),
              S.LinArrow(S.QUBIT, S.QUBIT))
    # applying the curried value to a state recovers the identity channel
    rho = np.array([[0.7, 0.1j], [-0.1j, 0.3]])
    applied = D.denote_closure(
        M.load(S.App(S.Abs("x", S.QUBIT, S.Var("x")), S.Var("y")),
               Q.QState(np.array([1.0, 0.0])), (("y", 1),)), CFG)
    assert np.allclose(C._dense(applied[("star",)]),
                       np.array([[1, 0], [0, 0]]).reshape(4, 1, order="F")
                       .reshape(2, 2, order="F"))
    assert mor.max_abs() > 0


def test_swap_function():
    term = S.Abs("p", S.TensorT(S.QUBIT, S.QUBIT),
                 S.LetPair("a", S.QUBIT, "b", S.QUBIT, S.Var("p"),
                           S.Pair(S.Var("b"), S.Var("a"))))
    mor = den(term)
    assert mor.max_abs() > 0


def test_denote_type_shapes():
    assert den(S.UnitVal(), S.UNIT).dst.labels() == (("star",),)
    lst = D.denote_type(S.ListT(S.QUBIT), CFG)
    assert tuple(d for _, d, _ in lst.elems) == (1, 2, 4, 8)
    bang = D.denote_type(S.BangArrow(S.QUBIT, S.QUBIT), CFG)
    assert all(g.order >= 1 for _, _, g in bang.elems)


def test_fixpoint_geometric_loop():
    # letrec f(u) = if coin then () else f(), applied: denotation 1
    import qlam.adequacy as A
    term = A.random_letrec_program(0)
    val = A.scalar_denotation(
        term, D.TruncationConfig(fix_iters=500, fix_tol=1e-14))
    assert val == pytest.approx(1.0, abs=1e-9)


def test_fixpoint_omega_is_zero():
    term = P.parse_term((PROGRAMS / "omega.qlam").read_text())
    import qlam.adequacy as A
    assert A.scalar_denotation(term, CFG) == 0.0


def test_denotation_trace_nonincreasing():
    # the interpretation of a closed qubit-type program is trace-nonincreasing
    term = S.App(S.STANDARD_GATES["H"], S.App(S.New(), S.ff()))
    mor = den(term, S.QUBIT)
    e = mor.entry(("star",), ("star",))
    rho = e.reshape(2, 2, order="F")
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)


def test_denote_closure_matches_direct():
    # denote_closure applies the context morphism to the actual state
    amps = np.array([0.6, 0.8j])
    cl = M.Closure(Q.QState(amps), (("x", 1),), S.App(S.Meas(), S.Var("x")))
    out = D.denote_closure(cl, CFG)
    assert C._dense(out[("inj", 0, ("star",))])[0, 0] == pytest.approx(0.36)
    assert C._dense(out[("inj", 1, ("star",))])[0, 0] == pytest.approx(0.64)


def test_contraction_route():
    # a !-variable used twice denotes through contraction without error
    ft = S.BangArrow(S.QUBIT, S.QUBIT)
    term = S.Abs("f", ft, S.Pair(S.App(S.Var("f"), S.App(S.New(), S.ff())),
                                 S.App(S.Var("f"), S.App(S.New(), S.ff()))))
    mor = den(term)
    assert mor.max_abs() > 0
