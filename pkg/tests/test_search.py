import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neshfs.evaluator import EvalRecord
from neshfs.search import (FeatureSubset, Ledger, SearchError, SearchParams,
                           canonical_key, down_search, general_schedule,
                           prefix_subset, run_general_search, run_neshfs,
                           select_top_k, subset_from_kept, up_search)

from conftest import make_ranked, stub_evaluator
from tables import (AVAZU_AUC, AVAZU_BEST, AVAZU_GENERAL_ORDER,
                    AVAZU_NEIGHBORHOOD_ORDER, CRITEO_BEST,
                    CRITEO_GENERAL_AUC, CRITEO_GENERAL_ORDER,
                    CRITEO_NEIGHBORHOOD_AUC, CRITEO_NEIGHBORHOOD_ORDER,
                    DIGIX_BEST, DIGIX_GENERAL_AUC, DIGIX_GENERAL_ORDER,
                    DIGIX_NEIGHBORHOOD_AUC, DIGIX_NEIGHBORHOOD_ORDER)


def constant_stub(auc=0.5):
    def evaluate(subset):
        return EvalRecord("", 0, 0, (), (), auc=auc, logloss=0.0,
                          train_time_s=0.0, epochs_run=0)
    return evaluate


def counting_stub(table, by="counts"):
    inner = stub_evaluator(table, by=by)
    calls = []

    def evaluate(subset):
        calls.append(subset.key)
        return inner(subset)
    return evaluate, calls


class TestGeneralSchedule:
    def test_digix_shape(self):
        schedule = general_schedule(make_ranked(3, 22), SearchParams(i=5, j=3))
        assert [s.counts for s in schedule] == DIGIX_GENERAL_ORDER

    def test_criteo_shape_and_order(self):
        schedule = general_schedule(make_ranked(13, 26), SearchParams(i=5, j=3))
        assert len(schedule) == 30
        assert [s.counts for s in schedule] == CRITEO_GENERAL_ORDER

    def test_numerical_free_shape(self):
        schedule = general_schedule(make_ranked(0, 24), SearchParams(i=5, j=0))
        assert [s.size for s in schedule] == AVAZU_GENERAL_ORDER

    def test_first_subset_is_the_full_set(self):
        schedule = general_schedule(make_ranked(4, 6), SearchParams(i=2, j=2))
        assert schedule[0].counts == (4, 6)
        assert schedule[0].removed_numerical == ()
        assert schedule[0].removed_categorical == ()

    def test_zero_i_with_categoricals_rejected(self):
        with pytest.raises(ValueError):
            general_schedule(make_ranked(2, 3), SearchParams(i=0, j=1))


class TestSubsets:
    def test_prefix_subset_orders(self):
        ranked = make_ranked(3, 4)
        subset = prefix_subset(ranked, 2, 1)
        assert subset.kept_numerical == ("n1", "n2")
        assert subset.kept_categorical == ("c01",)
        # lowest-scored features are removed first
        assert subset.removed_numerical == ("n3",)
        assert subset.removed_categorical == ("c04", "c03", "c02")

    def test_canonical_key_is_sorted(self):
        subset = prefix_subset(make_ranked(2, 2), 2, 2)
        assert subset.key == canonical_key(["n2", "c01", "n1", "c02"])
        assert subset.key == "c01|c02|n1|n2"

    def test_subset_from_kept_restores_rank_order(self):
        ranked = make_ranked(3, 3)
        subset = subset_from_kept(ranked, ["c03", "n2", "n1"])
        assert subset.kept_numerical == ("n1", "n2")
        assert subset.kept_categorical == ("c03",)
        assert subset.removed_numerical == ("n3",)
        assert subset.removed_categorical == ("c02", "c01")


class TestLedger:
    def test_dedup_rejects_double_insert(self):
        ledger = Ledger()
        record = EvalRecord("k", 1, 0, ("a",), (), 0.5, 0.1, 0.0, 1, "base")
        ledger.add(record)
        with pytest.raises(ValueError):
            ledger.add(record)

    def test_roundtrip_through_file(self, tmp_path):
        path = tmp_path / "ledger.jsonl"
        ledger = Ledger(path)
        ledger.add(EvalRecord("a|b", 1, 1, ("b",), ("a",),
                              0.7123, 0.3, 1.25, 4, "base"))
        ledger.add(EvalRecord("b", 1, 0, ("b",), (),
                              0.65, 0.4, 0.75, 2, "general"))
        loaded = Ledger.load(path)
        assert list(loaded.entries) == ["a|b", "b"]
        first = loaded.get("a|b")
        assert first.auc == 0.7123
        assert first.kept_categorical == ("a",)
        assert first.tag == "base"

    def test_missing_file_loads_empty(self, tmp_path):
        assert len(Ledger.load(tmp_path / "absent.jsonl")) == 0


class TestGeneralSearch:
    def test_digix_ledger_has_five_entries(self):
        ledger = Ledger()
        run_general_search(make_ranked(3, 22), SearchParams(i=5, j=3),
                           stub_evaluator(DIGIX_GENERAL_AUC), ledger)
        assert len(ledger) == 5
        tags = [r.tag for r in ledger.records()]
        assert tags == ["base"] + ["general"] * 4

    def test_rerun_adds_nothing(self):
        evaluator, calls = counting_stub(DIGIX_GENERAL_AUC)
        ledger = Ledger()
        params = SearchParams(i=5, j=3)
        run_general_search(make_ranked(3, 22), params, evaluator, ledger)
        assert len(calls) == 5
        run_general_search(make_ranked(3, 22), params, evaluator, ledger)
        assert len(calls) == 5
        assert len(ledger) == 5

    def test_criteo_thirty_entries(self):
        ledger = Ledger()
        run_general_search(make_ranked(13, 26), SearchParams(i=5, j=3),
                           stub_evaluator(CRITEO_GENERAL_AUC), ledger)
        assert len(ledger) == 30

    def test_failures_recorded_and_search_continues(self):
        def flaky(subset):
            if subset.counts == (3, 12):
                raise RuntimeError("boom")
            return constant_stub(0.6)(subset)

        ledger = Ledger()
        run_general_search(make_ranked(3, 22), SearchParams(i=5, j=3),
                           flaky, ledger)
        assert len(ledger) == 4
        assert len(ledger.failures) == 1

    def test_worker_pool_matches_sequential(self):
        params = SearchParams(i=5, j=3)
        sequential = Ledger()
        run_general_search(make_ranked(13, 26), params,
                           stub_evaluator(CRITEO_GENERAL_AUC), sequential)
        threaded = Ledger()
        run_general_search(make_ranked(13, 26), params,
                           stub_evaluator(CRITEO_GENERAL_AUC), threaded,
                           workers=4)
        assert list(sequential.entries) == list(threaded.entries)
        assert [r.tag for r in sequential.records()] == \
               [r.tag for r in threaded.records()]


class TestSelectTopK:
    def test_digix_top3(self):
        ranked = make_ranked(3, 22)
        ledger = Ledger()
        run_general_search(ranked, SearchParams(i=5, j=3),
                           stub_evaluator(DIGIX_GENERAL_AUC), ledger)
        top = select_top_k(ledger, 3, ranked)
        assert [s.counts for s in top] == [(3, 2), (3, 17), (3, 7)]

    def test_single_entry_ledger(self):
        ranked = make_ranked(1, 1)
        ledger = Ledger()
        run_general_search(ranked, SearchParams(i=1, j=1),
                           constant_stub(0.9), ledger)
        top = select_top_k(ledger, 3, ranked)
        assert len(top) == len(ledger)

    def test_equal_auc_prefers_smaller_subset(self):
        ranked = make_ranked(2, 2)
        ledger = Ledger()
        ledger.add(EvalRecord("c01|c02|n1|n2", 2, 2, ("n1", "n2"),
                              ("c01", "c02"), 0.8, 0.1, 0.0, 1, "base"))
        ledger.add(EvalRecord("c01|n1", 1, 1, ("n1",), ("c01",),
                              0.8, 0.1, 0.0, 1, "general"))
        top = select_top_k(ledger, 2, ranked)
        assert top[0].counts == (1, 1)

    def test_empty_ledger_raises(self):
        with pytest.raises(SearchError):
            select_top_k(Ledger(), 3, make_ranked(1, 1))


class TestUpSearch:
    def test_digix_start_3_2(self):
        ranked = make_ranked(3, 22)
        ledger = Ledger()
        evaluator, calls = counting_stub(
            {**DIGIX_GENERAL_AUC, **DIGIX_NEIGHBORHOOD_AUC})
        up_search(prefix_subset(ranked, 3, 2), ranked,
                  SearchParams(i=5, j=3, u=3), evaluator, ledger, tag="1-u")
        assert [(r.n_numerical, r.n_categorical) for r in ledger.records()] \
            == [(1, 3), (2, 3), (3, 3)]

    def test_criteo_start_10_26_dedups_the_base(self):
        ranked = make_ranked(13, 26)
        ledger = Ledger()
        table = {**CRITEO_GENERAL_AUC, **CRITEO_NEIGHBORHOOD_AUC}
        run_general_search(ranked, SearchParams(i=5, j=3),
                           stub_evaluator(table), ledger)
        evaluator, calls = counting_stub(table)
        up_search(prefix_subset(ranked, 10, 26), ranked,
                  SearchParams(i=5, j=3, u=3), evaluator, ledger, tag="1-u")
        assert len(calls) == 2  # (13, 26) already in the ledger
        new = [r for r in ledger.records() if r.tag == "1-u"]
        assert [(r.n_numerical, r.n_categorical) for r in new] \
            == [(11, 26), (12, 26)]

    def test_full_set_start_is_noop(self):
        ranked = make_ranked(3, 5)
        ledger = Ledger()
        evaluator, calls = counting_stub({}, by="counts")
        up_search(prefix_subset(ranked, 3, 5), ranked,
                  SearchParams(i=1, j=1, u=3), evaluator, ledger)
        assert calls == []
        assert len(ledger) == 0


class TestDownSearch:
    def _run(self, ranked, start, params, table):
        ledger = Ledger()
        down_search(start, ranked, params, stub_evaluator(table), ledger,
                    tag="d")
        return [(r.n_numerical, r.n_categorical) for r in ledger.records()]

    def test_digix_start_3_2_halts_at_three_features(self):
        ranked = make_ranked(3, 22)
        got = self._run(ranked, prefix_subset(ranked, 3, 2),
                        SearchParams(i=5, j=3, d=3, min_total=3),
                        {**DIGIX_GENERAL_AUC, **DIGIX_NEIGHBORHOOD_AUC})
        assert got == [(2, 2), (1, 2)]

    def test_digix_start_3_17_categorical_fallback(self):
        ranked = make_ranked(3, 22)
        got = self._run(ranked, prefix_subset(ranked, 3, 17),
                        SearchParams(i=5, j=3, d=3, min_total=3),
                        {**DIGIX_GENERAL_AUC, **DIGIX_NEIGHBORHOOD_AUC})
        assert got == [(2, 17), (1, 17), (3, 16)]

    def test_numerical_free_removes_one_categorical_per_iteration(self):
        ranked = make_ranked(0, 24)
        ledger = Ledger()
        down_search(prefix_subset(ranked, 0, 14), ranked,
                    SearchParams(i=5, j=0, d=3, min_total=3),
                    stub_evaluator(AVAZU_AUC, by="size"), ledger)
        assert [r.n_categorical for r in ledger.records()] == [13, 12, 11]

    def test_start_at_min_total_is_noop(self):
        ranked = make_ranked(3, 22)
        got = self._run(ranked, prefix_subset(ranked, 1, 2),
                        SearchParams(i=5, j=3, d=3, min_total=3),
                        {(1, 2): 0.5})
        assert got == []


class TestRunNeshfs:
    def test_digix_replay(self):
        table = {**DIGIX_GENERAL_AUC, **DIGIX_NEIGHBORHOOD_AUC}
        best, ledger = run_neshfs(make_ranked(3, 22),
                                  SearchParams(i=5, j=3, u=3, d=3, k=3),
                                  stub_evaluator(table))
        assert best.counts == DIGIX_BEST
        for tag, expected in DIGIX_NEIGHBORHOOD_ORDER.items():
            got = [(r.n_numerical, r.n_categorical)
                   for r in ledger.records() if r.tag == tag]
            assert got == expected, tag

    def test_criteo_replay(self):
        table = {**CRITEO_GENERAL_AUC, **CRITEO_NEIGHBORHOOD_AUC}
        best, ledger = run_neshfs(make_ranked(13, 26),
                                  SearchParams(i=5, j=3, u=3, d=3, k=3),
                                  stub_evaluator(table))
        assert best.counts == CRITEO_BEST
        assert ledger.get(best.key).auc == 0.74432
        for tag, expected in CRITEO_NEIGHBORHOOD_ORDER.items():
            got = [(r.n_numerical, r.n_categorical)
                   for r in ledger.records() if r.tag == tag]
            assert got == expected, tag

    def test_avazu_replay(self):
        best, ledger = run_neshfs(make_ranked(0, 24),
                                  SearchParams(i=5, j=0, u=3, d=3, k=3),
                                  stub_evaluator(AVAZU_AUC, by="size"))
        assert best.size == AVAZU_BEST
        for tag, expected in AVAZU_NEIGHBORHOOD_ORDER.items():
            got = [r.n_categorical for r in ledger.records() if r.tag == tag]
            assert got == expected, tag

    def test_degenerate_params_return_best_general_subset(self):
        best, ledger = run_neshfs(make_ranked(3, 22),
                                  SearchParams(i=5, j=3, u=0, d=0, k=0),
                                  stub_evaluator(DIGIX_GENERAL_AUC))
        assert best.counts == (3, 2)
        assert len(ledger) == 5

    def test_resume_from_populated_ledger_trains_nothing(self):
        table = {**DIGIX_GENERAL_AUC, **DIGIX_NEIGHBORHOOD_AUC}
        params = SearchParams(i=5, j=3, u=3, d=3, k=3)
        _, first = run_neshfs(make_ranked(3, 22), params,
                              stub_evaluator(table))
        evaluator, calls = counting_stub(table)
        best, second = run_neshfs(make_ranked(3, 22), params, evaluator,
                                  ledger=first)
        assert calls == []
        assert best.counts == DIGIX_BEST
        assert list(second.entries) == list(first.entries)


class TestStructuralProperties:
    @given(n_num=st.integers(0, 4), n_cat=st.integers(0, 6),
           i=st.integers(1, 4), j=st.integers(0, 3),
           u=st.integers(0, 4), d=st.integers(0, 4),
           k=st.integers(0, 4), min_total=st.integers(1, 4))
    @settings(max_examples=120, deadline=None)
    def test_engine_only_visits_prefix_pairs(self, n_num, n_cat, i, j, u, d,
                                             k, min_total):
        if n_num + n_cat == 0:
            return
        ranked = make_ranked(n_num, n_cat)
        counter = itertools.count()

        def stub(subset):
            return EvalRecord("", 0, 0, (), (),
                              auc=round(0.9 - 0.001 * next(counter), 6),
                              logloss=0.0, train_time_s=0.0, epochs_run=0)

        params = SearchParams(i=i, j=j, u=u, d=d, k=k, min_total=min_total)
        _, ledger = run_neshfs(ranked, params, stub)

        prefix_keys = {
            prefix_subset(ranked, a, b).key
            for a in range(n_num + 1) for b in range(n_cat + 1)
            if a + b > 0
        }
        for key, record in ledger.entries.items():
            assert key in prefix_keys
            # kept lists are rank prefixes of their kind
            assert record.kept_numerical == ranked.numerical_names[
                :record.n_numerical]
            assert record.kept_categorical == ranked.categorical_names[
                :record.n_categorical]

    @given(n_num=st.integers(0, 4), n_cat=st.integers(1, 6),
           i=st.integers(1, 4), j=st.integers(0, 3))
    @settings(max_examples=60, deadline=None)
    def test_schedule_is_deterministic(self, n_num, n_cat, i, j):
        ranked = make_ranked(n_num, n_cat)
        params = SearchParams(i=i, j=j)
        first = [s.key for s in general_schedule(ranked, params)]
        second = [s.key for s in general_schedule(ranked, params)]
        assert first == second
        assert len(set(first)) == len(first)
