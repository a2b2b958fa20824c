from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from walkguide.descriptions import DescriptionSet, Prediction
from walkguide.errors import EvaluationError
from walkguide.evaluation import (
    EvalConfig,
    EvalReport,
    embedding_f1,
    evaluate_run,
    fmt2,
    go_stop_accuracy,
    judge_description,
    lcs_length,
    meteor_lite,
    parse_rating,
    render_comparison,
    render_report,
    rouge_l,
    word_count,
)
from walkguide.gateway import CountingBackend, Gateway, MemoryCache, ScriptedBackend
from walkguide.scene import BenchRecord

from helpers import bench_row
from oracles import lcs_table

words = st.lists(st.sampled_from("a b c d e f g the cat sat ran".split()), min_size=1, max_size=12)


class TestRating:
    @pytest.mark.parametrize("n", range(1, 11))
    def test_all_valid(self, n):
        assert parse_rating(f"Rating: [[{n}]]") == n

    @pytest.mark.parametrize("n", [0, 11, 15, 42, 99])
    def test_out_of_range(self, n):
        assert parse_rating(f"Rating: [[{n}]]") is None

    def test_last_occurrence(self):
        assert parse_rating("first [[3]] then, final Rating: [[7]]") == 7

    @pytest.mark.parametrize("text", ["", "Rating: 7", "[7]", "[[seven]]"])
    def test_absent(self, text):
        assert parse_rating(text) is None


class TestRouge:
    def test_worked_example(self):
        assert rouge_l("a b c d", "a c d") == pytest.approx(6 / 7, abs=1e-4)

    def test_disjoint_and_empty(self):
        assert rouge_l("a b", "c d") == 0.0
        assert rouge_l("", "a") == 0.0

    @given(words, words)
    def test_lcs_matches_oracle(self, a, b):
        assert lcs_length(a, b) == lcs_table(a, b)

    @given(words)
    def test_identity(self, a):
        assert rouge_l(" ".join(a), " ".join(a)) == 1.0

    @given(words, st.data())
    def test_deletion_never_raises_lcs(self, a, data):
        i = data.draw(st.integers(0, len(a) - 1))
        shorter = a[:i] + a[i + 1:]
        assert lcs_length(shorter, a) <= lcs_length(a, a)

    def test_case_and_edge_punctuation(self):
        assert rouge_l("The path.", "the path") == 1.0


class TestMeteor:
    def test_worked_example(self):
        assert meteor_lite("the cat sat", "the cat ran") == pytest.approx(0.625, abs=1e-4)

    @given(words)
    def test_identity_closed_form(self, a):
        n = len(a)
        assert meteor_lite(" ".join(a), " ".join(a)) == pytest.approx(1 - 0.5 / n ** 3)

    def test_no_match(self):
        assert meteor_lite("a b", "c d") == 0.0

    def test_stem_match(self):
        assert meteor_lite("cars parked", "car parking") > 0

    def test_fragmentation_lowers_score(self):
        assert meteor_lite("c d a b", "a b c d") < meteor_lite("a b c d", "a b c d")


@pytest.mark.parametrize("text,n", [("Stop and wait. A car is on the path.", 9), ("", 0), ("  a   b ", 2)])
def test_word_count(text, n):
    assert word_count(text) == n


def test_embedding_f1_identical():
    rng = np.random.default_rng(0)
    table = {}

    def embed(tokens):
        return np.array([table.setdefault(t, rng.normal(size=8)) for t in tokens])

    assert embedding_f1("a b c", "a b c", embed) == pytest.approx(1.0)


def bench(n=4, passable=("go", "stop", "go", "stop")):
    return [BenchRecord.from_dict(bench_row(f"s{i}", passable[i % len(passable)])) for i in range(n)]


def pred(sid, reco="Follow the path. ok.", text="There are cars on the left side.", latency=1.0):
    ds = DescriptionSet(t_dest=text, t_left=text, t_right=text, t_path=text, t_desc=text, t_reco=reco,
                        latencies_s={"dest": latency, "reco": latency})
    return Prediction(sid, ds, backend_id="m1")


class TestGoStop:
    def test_three_of_four(self):
        preds = {"s0": "Follow the path.", "s1": "Stop and wait.", "s2": "Stop and wait.",
                 "s3": "stop and wait. car"}
        assert go_stop_accuracy(preds, bench()) == 0.75

    def test_unknown_counts_wrong(self):
        assert go_stop_accuracy({f"s{i}": "maybe" for i in range(4)}, bench()) == 0.0

    def test_unmatched(self):
        with pytest.raises(EvaluationError):
            go_stop_accuracy({"zz": "Follow the path"}, bench())


class TestJudge:
    def test_rating(self):
        v = judge_description("ref", "cand", Gateway(ScriptedBackend(["Good match. Rating: [[8]]"])))
        assert v.rating == 8 and v.attempts == 1

    def test_retries_bypass_cache(self):
        stub = ScriptedBackend(["no score here"])
        v = judge_description("ref", "cand", Gateway(stub, MemoryCache()))
        assert v.rating is None and stub.calls == 3 and v.explanation == "no score here"

    def test_category_local_prompt(self):
        stub = ScriptedBackend(["Rating: [[5]]"])
        judge_description("LEFT-REF", "LEFT-CAND", Gateway(stub))
        text = stub.requests[0].prompt_text
        assert "LEFT-REF" in text and "LEFT-CAND" in text


class TestEvaluateRun:
    def test_constant_judge(self):
        report = evaluate_run([pred("s0")], bench(1), Gateway(ScriptedBackend(["Rating: [[7]]"])))
        assert all(v == 7.0 for v in report.category_means.values())
        assert report.average == 7.0
        assert report.judged == 5 and report.present == 5 and report.missing == 0
        assert report.inference_time_s == 2.0
        assert report.words_mean == pytest.approx((4 * 7 + 4) / 5)

    def test_unmatched_before_any_judging(self):
        stub = CountingBackend("Rating: [[5]]")
        with pytest.raises(EvaluationError) as exc:
            evaluate_run([pred("s0"), pred("nope")], bench(1), Gateway(stub))
        assert exc.value.code == "unmatched-scene" and stub.calls == 0

    def test_missing_ratings_excluded(self):
        def script(request, n):
            return "no rating" if "cars" in request.prompt_text and n <= 3 else "Rating: [[6]]"

        report = evaluate_run([pred("s0")], bench(1), Gateway(ScriptedBackend(script), MemoryCache()),
                              EvalConfig(workers=1))
        assert report.present + report.missing == report.judged == 5
        assert report.missing == 1

    def test_metrics_only(self):
        stub = CountingBackend()
        report = evaluate_run([pred("s0")], bench(1), Gateway(stub), EvalConfig(metrics_only=True))
        assert stub.calls == 0 and report.average is None
        assert 0 < report.metric_means["rouge_l"] <= 1

    @given(st.lists(st.integers(1, 10), min_size=5, max_size=5), st.lists(st.integers(1, 10), min_size=5, max_size=5))
    def test_average_is_mean_of_categories(self, ra, rb):
        cats = ("dest", "left", "right", "path", "reco")
        ratings = {("s0", c): r for c, r in zip(cats, ra)} | {("s1", c): r for c, r in zip(cats, rb)}

        def script(request, n):
            for (sid, cat), r in ratings.items():
                if f"REF-{sid}-{cat}" in request.prompt_text:
                    return f"Rating: [[{r}]]"
            return "?"

        preds, refs = [], []
        for sid in ("s0", "s1"):
            row = bench_row(sid)
            for c in cats:
                row[c] = f"REF-{sid}-{c}"
            row["reco"] = "Follow the path. " + row["reco"]
            refs.append(BenchRecord.from_dict(row))
            preds.append(pred(sid))
        rep = evaluate_run(preds, refs, Gateway(ScriptedBackend(script)))
        means = [rep.category_means[c] for c in cats]
        assert math.isclose(rep.average, sum(means) / 5, abs_tol=1e-9)


class TestRender:
    def report(self, backend="m1", avg_parts=(4.43, 3.36, 3.25, 2.64, 4.93)):
        cats = ("dest", "left", "right", "path", "reco")
        return EvalReport(backend, dict(zip(cats, avg_parts)), 11.95, 6.81, 0.75,
                          {"rouge_l": 0.5, "meteor_lite": 0.4}, n_scenes=10, judged=50, present=50)

    def test_rounding(self):
        assert fmt2(3.7222) == "3.72" and fmt2(3.725) == "3.73" and fmt2(None) == "-"

    def test_column_order(self):
        header = render_report(self.report()).splitlines()[0].split()
        assert header[:8] == ["Backend", "Dest", "Left", "Right", "Path", "Reco", "Avg", "#"]

    def test_avg_cell(self):
        assert "3.72" in render_report(self.report()).splitlines()[2].split()

    def test_empty(self):
        text = render_report([])
        assert text.splitlines()[0].startswith("Backend") and "scenes=0" in text
        assert len(text.splitlines()) == 3

    def test_sorted_rows(self):
        text = render_report([self.report("zeta"), self.report("alpha")], fmt="csv")
        rows = text.splitlines()
        assert rows[1].startswith("alpha,") and rows[2].startswith("zeta,")

    def test_zero_delta(self):
        text = render_comparison(self.report(), self.report(), fmt="csv")
        delta = text.splitlines()[-1].split(",")
        assert delta[0] == "delta" and set(delta[1:-2]) == {"0.00"}
