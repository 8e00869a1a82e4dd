"""Dataset ingestion, splitting and subsampling tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exprank.data import (
    DataError,
    InteractionStore,
    SplitSpec,
    TripleRecord,
    load_id_maps,
    load_triples,
    save_id_maps,
    save_triples,
    split,
    subsample_training,
)


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


class TestLoadTriples:
    def test_projection_counts(self, tmp_path):
        f = tmp_path / "t.tsv"
        write_lines(f, ["u1\ti1\te1", "u1\ti1\te2", "u2\ti1\te1"])
        store = load_triples(f)
        assert store.n_users == 2
        assert store.n_items == 1
        assert store.n_explanations == 2
        assert store.triple_count == 3
        assert store.pair_expls[(0, 0)] == frozenset({0, 1})

    def test_empty_file(self, tmp_path):
        f = tmp_path / "empty.tsv"
        f.write_text("", encoding="utf-8")
        with pytest.raises(DataError, match="empty dataset"):
            load_triples(f)

    def test_duplicate_lines_deduplicated(self, tmp_path):
        f = tmp_path / "dup.tsv"
        write_lines(f, ["u1\ti1\te1", "u1\ti1\te1"])
        with pytest.warns(UserWarning, match="1 duplicate"):
            store = load_triples(f)
        assert store.triple_count == 1

    def test_malformed_line_reports_number(self, tmp_path):
        f = tmp_path / "bad.tsv"
        write_lines(f, ["u1\ti1\te1", "only two\tfields"])
        with pytest.raises(DataError, match=":2:"):
            load_triples(f)

    def test_dense_mode(self, tmp_path):
        f = tmp_path / "dense.tsv"
        write_lines(f, ["0\t0\t0", "1\t0\t1"])
        store = load_triples(f, id_mode="dense")
        assert store.n_users == 2
        assert store.user_ids == ("0", "1")

    def test_round_trip(self, tmp_path):
        f = tmp_path / "t.tsv"
        write_lines(f, ["u1\ti1\te1", "u1\ti1\te2", "u2\ti2\te1", "u3\ti1\te3"])
        store = load_triples(f)
        out = tmp_path / "copy.tsv"
        save_triples(store, out)
        clone = load_triples(out)
        assert clone.records == store.records
        assert clone.user_ids == store.user_ids
        assert clone.expl_ids == store.expl_ids

    def test_id_maps_fix_universe(self, tmp_path):
        f = tmp_path / "t.tsv"
        write_lines(f, ["u1\ti1\te1", "u2\ti2\te2", "u3\ti1\te3"])
        store = load_triples(f)
        save_id_maps(store, tmp_path / "ids")
        maps = load_id_maps(tmp_path / "ids")
        sub = tmp_path / "sub.tsv"
        write_lines(sub, ["u3\ti1\te3"])
        partial = load_triples(sub, id_maps=maps)
        assert partial.n_users == 3
        assert partial.n_explanations == 3
        assert partial.records[0].user == 2


class TestStoreInvariants:
    def test_derived_sets_are_projections(self):
        store = InteractionStore.from_triples(
            [(0, 0, 0), (0, 0, 1), (1, 0, 0), (1, 1, 2), (2, 1, 1)]
        )
        for (u, i), expls in store.pair_expls.items():
            for e in expls:
                assert e in store.expls_of_user[u]
                assert e in store.expls_of_item[i]
                assert u in store.users_of_expl[e]
                assert u in store.users_of_item[i]
                assert i in store.items_of_user[u]
        assert store.triple_count == sum(len(r.explanations) for r in store.records)

    def test_duplicate_pair_rejected(self):
        recs = [
            TripleRecord(0, 0, frozenset({0})),
            TripleRecord(0, 0, frozenset({1})),
        ]
        with pytest.raises(DataError, match="duplicate record"):
            InteractionStore(recs, 1, 1, 2)

    def test_empty_explanations_rejected(self):
        with pytest.raises(DataError):
            TripleRecord(0, 0, frozenset())

    @given(
        st.lists(
            st.tuples(
                st.integers(0, 5), st.integers(0, 5), st.integers(0, 7)
            ),
            min_size=1, max_size=60,
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_rebuildable_from_records(self, triples):
        store = InteractionStore.from_triples(triples)
        rebuilt = InteractionStore(
            store.records, store.n_users, store.n_items, store.n_explanations
        )
        assert rebuilt.pair_expls == store.pair_expls
        assert rebuilt.expls_of_user == store.expls_of_user
        assert rebuilt.expls_of_item == store.expls_of_item
        assert rebuilt.users_of_item == store.users_of_item
        assert rebuilt.users_of_expl == store.users_of_expl
        np.testing.assert_array_equal(rebuilt.triple_users, store.triple_users)


def toy_store(n_users=20, n_items=10, n_expl=15, seed=0):
    rng = np.random.default_rng(seed)
    triples = set()
    for u in range(n_users):
        for i in rng.choice(n_items, size=3, replace=False):
            for e in rng.choice(n_expl, size=2, replace=False):
                triples.add((u, int(i), int(e)))
    return InteractionStore.from_triples(sorted(triples))


class TestSplit:
    def test_deterministic(self):
        store = toy_store()
        spec = SplitSpec(seed=7)
        a = split(store, spec, 1)
        b = split(store, spec, 1)
        for sa, sb in zip(a, b):
            assert sa.records == sb.records

    def test_repetitions_differ(self):
        store = toy_store()
        spec = SplitSpec(seed=7)
        a, _, _ = split(store, spec, 0)
        b, _, _ = split(store, spec, 1)
        assert a.records != b.records

    def test_partition_is_exact(self):
        store = toy_store()
        train, valid, test = split(store, SplitSpec(seed=3), 0)
        all_records = sorted(
            train.records + valid.records + test.records,
            key=lambda r: (r.user, r.item),
        )
        assert all_records == sorted(store.records, key=lambda r: (r.user, r.item))
        assert not (set(train.records) & set(test.records))
        assert not (set(train.records) & set(valid.records))
        assert not (set(valid.records) & set(test.records))

    def test_coverage_guarantee(self):
        store = toy_store(seed=5)
        for rep in range(5):
            train, _, _ = split(store, SplitSpec(seed=11), rep)
            users, items, expls = train.entities_present()
            whole_u, whole_i, whole_e = store.entities_present()
            assert users == whole_u
            assert items == whole_i
            assert expls == whole_e

    def test_singleton_entity_always_lands_in_train(self):
        # explanation 9 appears in exactly one record
        triples = [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0), (2, 0, 9)]
        store = InteractionStore.from_triples(triples)
        for rep in range(5):
            train, _, _ = split(store, SplitSpec(seed=rep, repetitions=5), rep)
            assert any(9 in r.explanations for r in train.records)

    def test_train_ratio_before_validation(self):
        store = toy_store(n_users=50, n_items=30, n_expl=10, seed=2)
        assert store.record_count >= 100
        records = store.records[:100]
        base = store.subset(records)
        train, valid, test = split(
            base, SplitSpec(train_fraction=0.7, validation_fraction=0.0), 0
        )
        # 70 records modulo coverage repairs, which only add to train
        assert train.record_count >= 70
        assert train.record_count + test.record_count == 100
        assert valid.record_count == 0

    def test_validation_fraction(self):
        store = toy_store(n_users=60, n_items=20, n_expl=8, seed=4)
        train, valid, test = split(
            store, SplitSpec(validation_fraction=0.1), 0
        )
        total_training = train.record_count + valid.record_count
        assert valid.record_count == pytest.approx(0.1 * total_training, abs=2)

    def test_empty_store_rejected(self):
        store = toy_store()
        with pytest.raises(ValueError):
            split(store, SplitSpec(repetitions=2), 5)


class TestSubsample:
    def test_identity_at_full_ratio(self):
        store = toy_store()
        train, _, _ = split(store, SplitSpec(validation_fraction=0.0), 0)
        ratio = train.triple_count / store.triple_count
        out = subsample_training(train, ratio, store.triple_count, seed=0)
        assert out.records == train.records

    def test_target_arithmetic(self):
        store = toy_store(n_users=40, seed=9)
        train, _, _ = split(store, SplitSpec(validation_fraction=0.0), 0)
        whole = store.triple_count
        out = subsample_training(train, 0.3, whole, seed=1)
        assert out.triple_count == round(0.3 * whole)

    def test_deterministic(self):
        store = toy_store(seed=3)
        train, _, _ = split(store, SplitSpec(validation_fraction=0.0), 0)
        a = subsample_training(train, 0.4, store.triple_count, seed=5)
        b = subsample_training(train, 0.4, store.triple_count, seed=5)
        assert a.records == b.records

    def test_excessive_target_rejected(self):
        store = toy_store()
        train, _, _ = split(store, SplitSpec(), 0)
        with pytest.raises(DataError, match="exceeds"):
            subsample_training(train, 1.0, store.triple_count, seed=0)

    def test_records_with_emptied_sets_dropped(self):
        store = toy_store(seed=8)
        train, _, _ = split(store, SplitSpec(validation_fraction=0.0), 0)
        out = subsample_training(train, 0.1, store.triple_count, seed=2)
        assert all(r.explanations for r in out.records)
        kept_pairs = {(r.user, r.item) for r in out.records}
        parent_pairs = {(r.user, r.item) for r in train.records}
        assert kept_pairs <= parent_pairs
