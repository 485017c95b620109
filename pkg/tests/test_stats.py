import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rarekg.errors import EvaluationError
from rarekg.stats import (
    FinderDimension,
    FinderScorecard,
    aggregate_finder,
    bootstrap_ci,
    compare_groups,
    compare_groups_lenient,
    t_interval,
)

import oracles


class TestBootstrap:
    def test_seeded(self):
        vals = [0, 1, 1, 0, 1, 1, 1, 0]
        assert bootstrap_ci(vals, seed=3) == bootstrap_ci(vals, seed=3)
        assert bootstrap_ci(vals, seed=3) != bootstrap_ci(vals, seed=4)

    def test_constant(self):
        assert tuple(bootstrap_ci([0.25] * 9)) == (0.25, 0.25, 0.25, 0.0)

    def test_errors(self):
        for kw, code in [({"values": []}, "EMPTY_INPUT"), ({"values": [1, 2], "resamples": 0}, "BAD_RESAMPLES"),
                         ({"values": [1, 2], "level": 1.2}, "BAD_LEVEL")]:
            with pytest.raises(EvaluationError) as exc:
                bootstrap_ci(**kw)
            assert exc.value.code == code

    def test_block_generation_matches_single_draw(self):
        # many resamples over a long vector exercise the blocked path
        vals = np.random.default_rng(1).random(3000)
        res = bootstrap_ci(vals, resamples=400, seed=9)
        rng = np.random.default_rng(9)
        means = vals[rng.integers(0, 3000, size=(400, 3000))].mean(axis=1)
        assert res.stderr == pytest.approx(means.std(ddof=1), rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=40))
    def test_interval_contains_resample_range(self, vals):
        res = bootstrap_ci(vals, resamples=200)
        assert min(vals) - 1e-9 <= res.lower <= res.upper <= max(vals) + 1e-9
        assert res.half_width >= 0


class TestWelch:
    @pytest.mark.parametrize("a, b, t, df, p", oracles.WELCH_CASES)
    def test_frozen_values(self, a, b, t, df, p):
        res = compare_groups(a, b)
        assert res.statistic == pytest.approx(t, abs=1e-6)
        assert res.df == pytest.approx(df, abs=1e-6)
        assert res.pvalue == pytest.approx(p, abs=1e-6)

    def test_antisymmetric(self):
        a, b = oracles.WELCH_CASES[0][:2]
        ab, ba = compare_groups(a, b), compare_groups(b, a)
        assert ab.statistic == -ba.statistic and ab.pvalue == ba.pvalue

    def test_identical_groups(self):
        assert compare_groups([1.0, 2.0, 4.0], [1.0, 2.0, 4.0]).pvalue == 1.0

    def test_degenerate(self):
        with pytest.raises(EvaluationError) as exc:
            compare_groups([3, 3, 3], [3, 3])
        assert exc.value.code == "DEGENERATE_VARIANCE"
        with pytest.raises(EvaluationError):
            compare_groups([1], [1, 2])
        same = compare_groups_lenient([3, 3, 3], [3, 3])
        assert (same.statistic, same.pvalue, same.degenerate) == (0.0, 1.0, True)
        diff = compare_groups_lenient([2, 2], [3, 3])
        assert diff.statistic == -math.inf and diff.pvalue == 0.0


def card(model, case, value=3, **override):
    scores = {d.value: value for d in FinderDimension}
    scores.update(override)
    return FinderScorecard(case, model, "r1", scores)


class TestFinder:
    def test_scorecard_validation(self):
        with pytest.raises(EvaluationError) as exc:
            FinderScorecard("c", "m", "r", {"CASE_COMPREHENSION": 3})
        assert exc.value.code == "INCOMPLETE_SCORECARD"
        for bad in (0, 6, 2.5, True):
            with pytest.raises(EvaluationError) as exc:
                card("m", "c", CASE_COMPREHENSION=bad)
            assert exc.value.code == "BAD_SCORE"
        with pytest.raises(EvaluationError):
            FinderScorecard.from_dict({"case_id": "c", "model_tag": "m"})

    def test_t_interval(self):
        s = t_interval([1, 2, 3, 4])
        assert s.mean == 2.5
        assert s.half_width == pytest.approx(3.182446305284263 * math.sqrt((5 / 3) / 4))
        one = t_interval([4])
        assert one.single_observation and one.half_width == 0.0

    def test_aggregate(self):
        cards = [card("a", f"c{i}", v) for i, v in enumerate([3, 4, 5])]
        cards += [card("b", f"c{i}", 2) for i in range(3)]
        cards += [card("c", "c0", 5)]
        summary = aggregate_finder(cards)
        assert summary.dimensions["a"][FinderDimension.HARM_POTENTIAL].mean == 4.0
        ab = summary.comparisons[("a", "b")][FinderDimension.BIAS_FAIRNESS]
        assert ab.statistic > 0 and not ab.degenerate
        assert summary.comparisons[("a", "c")] == {}
        assert summary.dimensions["c"][FinderDimension.CASE_COMPREHENSION].single_observation
        doc = summary.to_dict()
        assert set(doc["dimensions"]) == {"a", "b", "c"}
        with pytest.raises(EvaluationError):
            aggregate_finder([])
