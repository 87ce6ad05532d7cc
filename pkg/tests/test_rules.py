"""Rule family oracles: enumeration vs counting, verification fuzz, sampler
uniformity, and the stored combinatorial constants."""

import itertools
import math

import numpy as np
import pytest

from rulelab.rules import (DEFAULT_ENUM_CAP, Encoding, Family, RuleSpec,
                           RejectionBudgetError, RuleError, count_valid,
                           enumerate_valid, sample_valid, verify, verify_batch,
                           _count_latin_brute)


def rng(seed=0):
    return np.random.default_rng(seed)


# -- counting and enumeration agree wherever brute force is feasible -----------------

BRUTE_FORCE_RULES = [
    RuleSpec(Family.GROUP_PARITY, D=6, G=3),
    RuleSpec(Family.GROUP_PARITY, D=12, G=2),
    RuleSpec(Family.GROUP_PARITY, D=12, G=4),
    RuleSpec(Family.GROUP_PARITY, D=12, G=12),
    RuleSpec(Family.EXACT_K, D=12, K=6),
    RuleSpec(Family.EXACT_K, D=12, K=0),
    RuleSpec(Family.EXACT_K, D=3, K=1),
    RuleSpec(Family.ROW_K, n=3, K=1),
    RuleSpec(Family.ROW_K, n=4, K=2),
    RuleSpec(Family.ROW_VARIABLE_K, n=3, kset=(0, 2)),
    RuleSpec(Family.GLOBAL_K, n=3, kset=(1, 3)),
    RuleSpec(Family.ROW_ONLY_LATIN, n=3),
    RuleSpec(Family.LATIN_SQUARE, n=3),
    RuleSpec(Family.LATIN_SQUARE, n=4),
    RuleSpec(Family.SUDOKU, n=4, block_shape=(2, 2)),
]


@pytest.mark.parametrize("rule", BRUTE_FORCE_RULES, ids=lambda r: r.to_string())
def test_enumeration_matches_count(rule):
    ev = enumerate_valid(rule)
    assert len(ev) == count_valid(rule)
    # duplicate-free
    assert len({row.tobytes() for row in ev}) == len(ev)
    # all valid
    ok, _ = verify_batch(rule, ev)
    assert ok.all()
    # lexicographically sorted
    for a, b in zip(ev[:-1], ev[1:]):
        assert tuple(a) < tuple(b)


def test_single_group_parity_enumeration():
    rule = RuleSpec(Family.GROUP_PARITY, D=3, G=3)
    ev = enumerate_valid(rule)
    expected = {(1, 1, 1), (-1, -1, 1), (-1, 1, -1), (1, -1, -1)}
    assert {tuple(r) for r in ev} == expected
    assert len(ev) == 4


def test_exactk_unique_sample():
    rule = RuleSpec(Family.EXACT_K, D=4, K=4)
    assert count_valid(rule) == 1
    s = sample_valid(rule, rng())
    assert (s == 1).all()


def test_latin_cyclic_grid_valid():
    rule = RuleSpec(Family.LATIN_SQUARE, n=3)
    grid = np.array([0, 1, 2, 1, 2, 0, 2, 0, 1])
    assert verify(rule, grid).sample_valid


def test_paper_constants():
    assert count_valid(RuleSpec(Family.EXACT_K, D=36, K=3)) == 7140
    assert count_valid(RuleSpec(Family.LATIN_SQUARE, n=3)) == 12
    assert count_valid(RuleSpec(Family.LATIN_SQUARE, n=4)) == 576
    assert count_valid(RuleSpec(Family.LATIN_SQUARE, n=5)) == 161_280
    assert count_valid(RuleSpec(Family.LATIN_SQUARE, n=6)) == 812_851_200
    assert count_valid(RuleSpec(Family.SUDOKU, n=6)) == 28_200_960
    assert count_valid(RuleSpec(Family.ROW_ONLY_LATIN, n=3)) == 216
    assert count_valid(RuleSpec(Family.ROW_ONLY_LATIN, n=4)) == 331_776
    assert count_valid(RuleSpec(Family.GROUP_PARITY, D=36, G=6)) == 2**30


def test_group_parity_count_formula():
    # (2^(G-1))^(D/G), cross-checked by enumeration at D=6, G=3
    rule = RuleSpec(Family.GROUP_PARITY, D=6, G=3)
    assert count_valid(rule) == 16 == len(enumerate_valid(rule))


def test_rowk_counts():
    assert count_valid(RuleSpec(Family.ROW_K, n=6, K=2)) == math.comb(6, 2) ** 6
    assert count_valid(RuleSpec(Family.ROW_VARIABLE_K, n=6, kset=(1, 5))) == 12**6
    assert (count_valid(RuleSpec(Family.GLOBAL_K, n=6, kset=(1, 5)))
            == 6**6 + 6**6)


def test_latin_brute_force_cross_checks_stored_constants():
    assert _count_latin_brute(3) == 12
    assert _count_latin_brute(4) == 576
    assert _count_latin_brute(4, (2, 2)) == 288


def test_enumeration_cap():
    rule = RuleSpec(Family.GROUP_PARITY, D=36, G=6)
    with pytest.raises(RuleError):
        enumerate_valid(rule, cap=1000)


def test_count_unsupported_size_errors():
    with pytest.raises(RuleError):
        count_valid(RuleSpec(Family.LATIN_SQUARE, n=7))


# -- verification behavior ---------------------------------------------------------

def test_verify_parity_examples():
    rule = RuleSpec(Family.GROUP_PARITY, D=6, G=3)
    good = verify(rule, np.array([1, 1, 1, -1, 1, -1]))
    assert good.sample_valid and all(ok for _, ok in good.per_constraint)
    bad = verify(rule, np.array([1, 1, -1, 1, 1, 1]))
    assert not bad.sample_valid
    assert dict(bad.per_constraint)["group0"] is np.False_ or not dict(bad.per_constraint)["group0"]
    assert dict(bad.per_constraint)["group1"]


def test_verify_report_conjunction():
    rule = RuleSpec(Family.SUDOKU, n=4, block_shape=(2, 2))
    for s in enumerate_valid(rule)[:20]:
        rep = verify(rule, s)
        assert rep.sample_valid == all(ok for _, ok in rep.per_constraint)


def test_verify_alphabet_errors():
    rule = RuleSpec(Family.GROUP_PARITY, D=4, G=2)
    with pytest.raises(RuleError):
        verify(rule, np.array([1, 1, 0, 1]))
    with pytest.raises(RuleError):
        verify(rule, np.array([1, 1, 1]))
    cat = RuleSpec(Family.LATIN_SQUARE, n=3)
    with pytest.raises(RuleError):
        verify(cat, np.full(9, 5))


def test_globalk_requires_shared_count():
    rule = RuleSpec(Family.GLOBAL_K, n=3, kset=(1, 2))
    mixed = np.array([1, -1, -1,   # count 1
                      1, 1, -1,    # count 2
                      1, -1, -1])  # count 1
    assert not verify(rule, mixed).sample_valid
    shared = np.array([1, -1, -1, -1, 1, -1, -1, -1, 1])
    assert verify(rule, shared).sample_valid


# -- sampler fuzz: every generated sample verifies ----------------------------------

FUZZ_RULES = [
    (RuleSpec(Family.GROUP_PARITY, D=36, G=6), 10_000),
    (RuleSpec(Family.EXACT_K, D=36, K=3), 10_000),
    (RuleSpec(Family.ROW_K, n=6, K=2), 10_000),
    (RuleSpec(Family.ROW_VARIABLE_K, n=6, kset=(0, 2, 4, 6)), 10_000),
    (RuleSpec(Family.GLOBAL_K, n=6, kset=(3, 4)), 10_000),
    (RuleSpec(Family.ROW_ONLY_LATIN, n=6), 10_000),
    (RuleSpec(Family.LATIN_SQUARE, n=6), 10_000),
]


@pytest.mark.parametrize("rule,count", FUZZ_RULES, ids=lambda v: str(v))
def test_sampler_fuzz(rule, count):
    r = rng(42)
    batch = np.stack([sample_valid(rule, r) for _ in range(count)])
    ok, _ = verify_batch(rule, batch)
    assert ok.all()


def test_sudoku_fuzz_and_oversampling_ratio():
    """All rejection-sampled grids verify; the Latin-draws-per-grid ratio sits
    loosely around the ratio of the two support sizes (~28.8)."""
    rule = RuleSpec(Family.SUDOKU, n=6)
    r = rng(7)
    attempts = []
    batch = np.stack([sample_valid(rule, r, count_attempts=attempts)
                      for _ in range(10_000)])
    ok, _ = verify_batch(rule, batch)
    assert ok.all()
    mean_attempts = np.mean(attempts)
    assert 14.0 < mean_attempts < 58.0, mean_attempts


def test_parity_group_uniformity():
    """10^6 draws over the 16 valid samples of D=6, G=3 stay within 5 sigma of
    multinomial noise."""
    rule = RuleSpec(Family.GROUP_PARITY, D=6, G=3)
    ev = enumerate_valid(rule)
    index = {row.tobytes(): i for i, row in enumerate(ev)}
    r = rng(123)
    n_draws = 1_000_000
    counts = np.zeros(16, dtype=np.int64)
    # vectorized parity draws: 2 free bits per group, last bit from the product
    for start in range(0, n_draws, 100_000):
        b = min(100_000, n_draws - start)
        free = r.integers(0, 2, size=(b, 2, 2)) * 2 - 1
        last = free.prod(axis=2, keepdims=True)
        samp = np.concatenate([free, last], axis=2).reshape(b, 6)
        for row in samp:
            counts[index[np.ascontiguousarray(row, dtype=np.int64).tobytes()]] += 1
    p = 1 / 16
    sigma = math.sqrt(n_draws * p * (1 - p))
    assert np.abs(counts - n_draws * p).max() < 5 * sigma


def test_batch_sampler_valid_and_uniform():
    """sample_valid_batch draws valid samples with the same uniform law as the
    scalar sampler (chi-square sanity on a fully enumerable family)."""
    from rulelab.rules import sample_valid_batch

    for text in ("parity:D=12,G=3", "exactk:D=10,K=4", "rowk:n=4,K=2",
                 "rowvark:n=4,K={1,3}", "globalk:n=4,K={1,3}", "rowlatin:n=4"):
        rule = RuleSpec.parse(text)
        batch = sample_valid_batch(rule, rng(3), 4000)
        ok, _ = verify_batch(rule, batch)
        assert ok.all(), text
    rule = RuleSpec(Family.GROUP_PARITY, D=6, G=3)
    ev = enumerate_valid(rule)
    index = {row.tobytes(): i for i, row in enumerate(ev)}
    draws = sample_valid_batch(rule, rng(11), 160_000)
    counts = np.zeros(len(ev))
    for row in draws:
        counts[index[np.ascontiguousarray(row).tobytes()]] += 1
    expected = len(draws) / len(ev)
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # 15 dof: far tail bound
    assert chi2 < 50.0, chi2


def test_sampler_matches_library_sampler_distribution():
    # sanity: sample_valid for parity uses the same free-bits construction
    rule = RuleSpec(Family.GROUP_PARITY, D=6, G=3)
    r = rng(5)
    batch = np.stack([sample_valid(rule, r) for _ in range(4000)])
    ok, _ = verify_batch(rule, batch)
    assert ok.all()
    # every one of the 16 valid samples appears
    assert len({row.tobytes() for row in batch}) == 16


# -- rule spec parsing and invariants ------------------------------------------------

def test_rule_spec_parse_roundtrip():
    for text in ("parity:D=36,G=6", "exactk:D=36,K=3", "rowk:n=6,K=2",
                 "rowvark:n=6,K={1,5}", "globalk:n=6,K={3,4}", "rowlatin:n=6",
                 "latin:n=5", "sudoku:n=6,block=2x3",
                 "latin:n=6,enc=onehot"):
        rule = RuleSpec.parse(text)
        again = RuleSpec.parse(rule.to_string())
        assert rule == again
        assert RuleSpec.from_dict(rule.to_dict()) == rule


def test_rule_spec_invariants():
    with pytest.raises(RuleError):
        RuleSpec(Family.GROUP_PARITY, D=10, G=3)
    with pytest.raises(RuleError):
        RuleSpec(Family.EXACT_K, D=8, K=9)
    with pytest.raises(RuleError):
        RuleSpec(Family.ROW_VARIABLE_K, n=4, kset=())
    with pytest.raises(RuleError):
        RuleSpec(Family.ROW_VARIABLE_K, n=4, kset=(5,))
    with pytest.raises(RuleError):
        RuleSpec(Family.SUDOKU, n=6, block_shape=(2, 2))
    with pytest.raises(RuleError):
        RuleSpec.parse("nosuchfamily:D=4")


def test_sudoku_default_block_shape():
    assert RuleSpec(Family.SUDOKU, n=6).block_shape == (2, 3)
    assert RuleSpec(Family.SUDOKU, n=4).block_shape == (2, 2)
