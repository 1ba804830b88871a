"""Penalty table, adjusted and standard BIC."""

import math
from fractions import Fraction

import numpy as np
import pytest

from adjbic.classify import Label, SingularityClass, classify_stats
from adjbic.errors import DomainError
from adjbic.mle import EmConfig
from adjbic.model import ModelParams, ProbTable, joint_from_params, product_table
from adjbic.score import (
    NoScoreError,
    adjusted_bic,
    penalty_table,
    score_gap,
    score_stats,
    standard_bic,
)

CFG = EmConfig(restarts=16)


def fake_class(label, f_Y):
    return SingularityClass(Label(label), None, 0.0, 1e-6, f_Y)


class TestPenaltyTable:
    def test_values(self):
        assert penalty_table(3, Label.REGULAR) == (Fraction(7, 2), 0)
        assert penalty_table(3, Label.TYPE2) == (Fraction(2), 0)
        assert penalty_table(2, Label.DEGENERATE_N2_SP) == (Fraction(3, 2), 2)
        assert penalty_table(1, Label.DEGENERATE_N1) == (Fraction(1, 2), 0)
        assert penalty_table(2, Label.DEGENERATE_N2_NON_SP) == (Fraction(3, 2), 0)
        assert penalty_table(5, Label.TYPE1) == (Fraction(9, 2), 0)

    def test_outside_model(self):
        with pytest.raises(NoScoreError):
            penalty_table(3, Label.OUTSIDE_MODEL)

    @pytest.mark.parametrize(
        "n,label", [(2, Label.REGULAR), (3, Label.DEGENERATE_N1), (3, Label.DEGENERATE_N2_SP), (0, Label.TYPE2)]
    )
    def test_label_n_mismatch(self, n, label):
        with pytest.raises(DomainError):
            penalty_table(n, label)

    def test_accepts_strings(self):
        assert penalty_table(3, "Type1") == (Fraction(5, 2), 0)


class TestScoreGap:
    def test_values(self):
        assert score_gap(3, Label.TYPE2) == Fraction(3, 2)
        assert score_gap(5, Label.TYPE1) == 1
        for n in range(3, 9):
            assert score_gap(n, Label.REGULAR) == 0
            assert score_gap(n, Label.TYPE2) == Fraction(n, 2)
            assert score_gap(n, Label.TYPE1) == 1


class TestAdjustedBic:
    def test_type2_uniform_gap(self):
        y = ProbTable(np.full(8, 1 / 8))
        f_Y = -3 * math.log(2)
        r = adjusted_bic(y, 10_000, fake_class("Type2", f_Y), f_Y)
        assert r.adjusted - r.standard_bic == pytest.approx(1.5 * math.log(1e4), abs=1e-9)

    def test_n1_lam(self):
        y = ProbTable([0.7, 0.3])
        r = adjusted_bic(y, 100, fake_class("Degenerate_n1", -0.6), -0.6)
        assert r.lam == Fraction(1, 2)

    def test_n2_uniform(self):
        y = ProbTable(np.full(4, 0.25))
        r = score_stats(y, 10**6, cfg=CFG)
        assert r.label is Label.DEGENERATE_N2_SP
        N = 1e6
        expect = -2 * N * math.log(2) - 1.5 * math.log(N) + 2 * math.log(math.log(N))
        assert r.adjusted == pytest.approx(expect, rel=1e-12)

    def test_lnln_needs_N3(self):
        y = ProbTable(np.full(4, 0.25))
        with pytest.raises(DomainError):
            adjusted_bic(y, 2, fake_class("Degenerate_n2_S'", -2 * math.log(2)), -2 * math.log(2))

    def test_invariants(self):
        y = product_table([0.2, 0.5, 0.6, 0.9])
        cls = classify_stats(y, cfg=CFG)
        r = adjusted_bic(y, 500, cls, cls.f_Y)
        assert r.adjusted == pytest.approx(500 * cls.f_Y - float(r.lam) * math.log(500), rel=1e-14)
        assert r.standard_bic == standard_bic(cls.f_Y, 500, 4)

    def test_regular_equals_standard(self):
        y = joint_from_params(ModelParams([0.9, 0.8, 0.7], [0.1, 0.2, 0.3], 0.4))
        r = score_stats(y, 1000, cfg=CFG)
        assert r.label is Label.REGULAR
        assert r.adjusted == r.standard_bic
        assert r.laplace is not None

    def test_monotone_in_N(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            y = product_table(rng.uniform(0.1, 0.9, 3))
            cls = classify_stats(y, cfg=CFG)
            vals = [adjusted_bic(y, N, cls, cls.f_Y).adjusted for N in (3, 10, 100, 10**4, 10**6)]
            assert np.all(np.diff(vals) < 0)

    def test_permutation_invariant(self):
        y = joint_from_params(ModelParams([0.9, 0.9, 0.5], [0.1, 0.1, 0.5], 0.5))
        a = score_stats(y, 100, cfg=CFG)
        b = score_stats(y.permuted([2, 0, 1]), 100, cfg=CFG)
        assert (a.lam, a.lnln_coeff) == (b.lam, b.lnln_coeff)


class TestOutsideModel:
    def test_warns_and_reports_standard(self):
        y = ProbTable.normalized([0.3, 0.01, 0.01, 0.2, 0.01, 0.2, 0.01, 0.3])
        with pytest.warns(UserWarning, match="outside the model"):
            r = score_stats(y, 100, cfg=CFG)
        assert r.adjusted is None and r.lam is None
        assert r.standard_bic == pytest.approx(100 * r.f_Y - 3.5 * math.log(100))
        assert r.to_dict()["intercept"] == "unknown O(1)"
