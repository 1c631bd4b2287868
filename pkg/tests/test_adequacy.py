"""Adequacy harness: generators, consumers, biased coins, fuzz plumbing."""

import numpy as np
import pytest

import qlam.adequacy as A
import qlam.denote as D
import qlam.machine as M
import qlam.syntax as S
import qlam.typecheck as T


def test_consume_bit_of_cointoss():
    rep = A.check_adequacy(S.App(A.consume_term(S.BIT), A.COIN))
    assert rep.verdict == "PASS"
    assert rep.denot == pytest.approx(1.0, abs=1e-9)
    assert rep.halt_lower == pytest.approx(1.0, abs=1e-9)


def test_omega_adequacy():
    rep = A.check_adequacy(S.Omega(S.UNIT))
    assert rep.verdict == "PASS"
    assert rep.denot == 0.0 and rep.halt_lower == 0.0


def test_coin_guarded_omega():
    term = S.if_term(A.COIN, S.UnitVal(), S.Omega(S.UNIT))
    rep = A.check_adequacy(term)
    assert rep.verdict == "PASS"
    assert rep.denot == pytest.approx(0.5, abs=1e-9)
    assert rep.halt_lower == pytest.approx(0.5, abs=1e-9)


def test_not_unit_type():
    with pytest.raises(A.NotUnitType):
        A.check_adequacy(S.tt())


def test_not_closed():
    with pytest.raises(A.NotClosed):
        A.check_adequacy(S.Var("x"))


def test_generator_shapes():
    assert A.generate_term(S.QUBIT) == S.lam_unit(S.App(S.New(), S.ff()))
    c = A.consume_term(S.QUBIT)
    assert isinstance(c, S.Abs) and isinstance(c.body, S.Match)


GC_TYPES = [
    S.QUBIT, S.UNIT, S.BIT,
    S.LinArrow(S.QUBIT, S.QUBIT),
    S.TensorT(S.QUBIT, S.BIT),
    S.SumT(S.QUBIT, S.UNIT),
    S.BangArrow(S.QUBIT, S.QUBIT),
    S.ListT(S.QUBIT),
    S.LinArrow(S.BIT, S.TensorT(S.UNIT, S.QUBIT)),
]


@pytest.mark.parametrize("ty", GC_TYPES, ids=str)
def test_generate_consume_typecheck(ty):
    T.typecheck(A.generate_term(ty), S.LinArrow(S.UNIT, ty))
    T.typecheck(A.consume_term(ty), S.LinArrow(ty, S.UNIT))


NONZERO_TYPES = [
    S.QUBIT, S.UNIT, S.BIT,
    S.LinArrow(S.QUBIT, S.QUBIT),
    S.TensorT(S.QUBIT, S.QUBIT),
    S.SumT(S.UNIT, S.QUBIT),
    S.TensorT(S.BIT, S.BIT),
]


@pytest.mark.parametrize("ty", NONZERO_TYPES, ids=str)
def test_nonzero_representability(ty):
    cfg = D.TruncationConfig(list_max=2, bang_max=2)
    term = S.App(A.generate_term(ty), S.UnitVal())
    mor = D.denote(T.typecheck(term, ty), cfg)
    assert mor.max_abs() > 1e-9


def test_biased_coin_denotation():
    for rho in (0.0, 0.25, 0.5, 1.0):
        term = A.biased_coin(rho)
        mor = D.denote(T.typecheck(term, S.BIT), D.DEFAULT_CONFIG)
        src0 = mor.src.labels()[0]

        def prob(i):
            e = mor.entries.get((src0, ("inj", i, ("star",))))
            return 0.0 if e is None else float(np.real(e[0, 0]))

        assert prob(0) == pytest.approx(rho, abs=1e-12)
        assert prob(1) == pytest.approx(1 - rho, abs=1e-12)


def test_biased_coin_operational():
    dist = M.evaluate(M.load(A.biased_coin(0.25)))
    assert dist.prob_of(S.ff()) == pytest.approx(0.25, abs=1e-12)
    assert dist.prob_of(S.tt()) == pytest.approx(0.75, abs=1e-12)


def test_biased_coin_sampled_band():
    n = 4000
    hits = sum(M.sample(M.load(A.biased_coin(0.25)), seed).final.term
               == S.ff() for seed in range(n))
    sigma = np.sqrt(0.25 * 0.75 / n)
    assert abs(hits / n - 0.25) < 3 * sigma


def test_biased_coin_extremes():
    assert M.evaluate(M.load(A.biased_coin(1.0))).prob_of(S.ff()) == 1.0
    with pytest.raises(ValueError):
        A.biased_coin(1.5)


def test_random_finitary_is_finitary_and_typechecks():
    for seed in range(25):
        term = A.random_finitary_program(seed, 10)
        assert A.is_finitary(term)
        T.typecheck(term, S.UNIT)


def test_random_finitary_deterministic():
    assert A.random_finitary_program(3, 10) == A.random_finitary_program(3, 10)


def test_random_letrec_is_not_finitary():
    for seed in range(10):
        term = A.random_letrec_program(seed)
        assert not A.is_finitary(term)
        T.typecheck(term, S.UNIT)


def test_fuzz_sample_passes():
    for seed in range(20):
        rep = A.check_adequacy(A.random_finitary_program(seed, 8))
        assert rep.verdict == "PASS", rep.line()


def test_letrec_sandwich_sample():
    cfg = D.TruncationConfig(list_max=2, bang_max=2,
                             fix_iters=2000, fix_tol=1e-12)
    for seed in range(8):
        rep = A.check_adequacy(A.random_letrec_program(seed), cfg,
                               max_steps=300)
        assert rep.verdict == "PASS", rep.line()
        assert (rep.halt_lower - 1e-6 <= rep.denot
                <= rep.halt_lower + rep.residual + 1e-6)


def test_approximant_denotations_nondecreasing():
    # denotation at letrec^n grows monotonically toward the fixpoint value
    term = A.random_letrec_program(0)
    cfg = D.TruncationConfig(fix_iters=200, fix_tol=1e-14)
    vals = [A.scalar_denotation(S.lower_approximant(term, n), cfg)
            for n in (0, 1, 2, 4, 8)]
    for lo, hi in zip(vals, vals[1:]):
        assert hi >= lo - 1e-12
    assert vals[-1] <= A.scalar_denotation(term, cfg) + 1e-9
