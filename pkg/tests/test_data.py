import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablerank.data import (
    CapacityConfig,
    ScoreMatrix,
    build_preferences,
    dump_interactions,
    dump_split_manifest,
    kcore_filter,
    load_interactions,
    load_split_manifest,
    lower_bound_cap,
    split_dataset,
    validate_feasibility,
    PreferenceProfile,
)
from stablerank.errors import (
    ConfigError,
    DataError,
    DuplicateInteractionError,
    InfeasibleCapacityError,
    ParseError,
    ShortPreferenceListError,
)

from conftest import dataset_from_triples, random_dataset


def test_movielens_line():
    d = load_interactions(b"1::1193::5::978300760\n", "movielens-dat")
    assert d.user_ids == ("1",) and d.item_ids == ("1193",)
    assert d.ratings[0] == 5.0 and d.timestamps[0] == 978300760


def test_csv_line_without_timestamp():
    d = load_interactions(io.BytesIO(b"u1,i1,4.0\n"), "csv")
    assert (d.user_ids, d.item_ids, d.ratings[0], d.timestamps) == (("u1",), ("i1",), 4.0, None)


def test_duplicate_reported_with_line():
    with pytest.raises(DuplicateInteractionError, match="line 2"):
        load_interactions(b"u1,i1,4.0\nu1,i1,3.0\n", "csv")


@pytest.mark.parametrize("text, line", [(b"u1,i1\n", 1), (b"u1,i1,4\nu2,i1,abc\n", 2), (b"a::b::x::1\n", 1)])
def test_malformed_lines(text, line):
    fmt = "movielens-dat" if b"::" in text else "csv"
    with pytest.raises(ParseError, match=f"line {line}"):
        load_interactions(text, fmt)


def test_first_appearance_indexing_and_header():
    d = load_interactions("user,item,rating\nb,x,1\na,y,2\nb,y,3\n", "csv")
    assert d.user_ids == ("b", "a") and d.item_ids == ("x", "y")
    assert d.users.tolist() == [0, 1, 0] and d.items.tolist() == [0, 1, 1]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_serialization_round_trip(seed, with_time):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, 5, 6)
    if with_time:
        d = type(d)(d.user_ids, d.item_ids, d.users, d.items, d.ratings, rng.integers(0, 10**9, len(d)))
    again = load_interactions(dump_interactions(d), "csv")
    assert d.same_content(again)


def _user_with(n):
    return dataset_from_triples([("u", f"i{j}", 3) for j in range(n)])


def test_split_counts_for_ten_interactions():
    s = split_dataset(_user_with(10), (0.8, 0.1, 0.1), seed=3)
    assert (len(s.train), len(s.validation), len(s.test)) == (8, 1, 1)


def test_split_is_deterministic():
    d = random_dataset(np.random.default_rng(0), 20, 30)
    a, b = split_dataset(d, seed=11), split_dataset(d, seed=11)
    assert np.array_equal(a.roles, b.roles)
    assert dump_split_manifest(a) == dump_split_manifest(b)


def test_small_users_stay_in_train():
    s = split_dataset(_user_with(2), seed=0)
    assert (len(s.train), len(s.validation), len(s.test)) == (2, 0, 0)


def test_split_rejects_bad_ratios():
    with pytest.raises(ConfigError):
        split_dataset(_user_with(5), (0.5, 0.5, 0.5))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_split_partitions_source(seed):
    d = random_dataset(np.random.default_rng(seed), 8, 12, density=0.6)
    s = split_dataset(d, (0.8, 0.1, 0.1), seed)
    keys = [set(zip(p.users.tolist(), p.items.tolist())) for p in (s.train, s.validation, s.test)]
    assert not (keys[0] & keys[1] or keys[0] & keys[2] or keys[1] & keys[2])
    assert set().union(*keys) == set(zip(d.users.tolist(), d.items.tolist()))
    for u in range(d.n_users):
        n = int((d.users == u).sum())
        if n >= 3:
            for part, ratio in zip((s.validation, s.test), (0.1, 0.1)):
                assert abs(int((part.users == u).sum()) - n * ratio) <= 1


def test_manifest_round_trip():
    d = random_dataset(np.random.default_rng(5), 6, 9)
    s = split_dataset(d, seed=2)
    again = load_split_manifest(dump_split_manifest(s))
    assert again.source.same_content(d)
    assert np.array_equal(again.roles, s.roles)


def test_kcore_filter():
    triples = [(f"u{u}", f"i{i}", 4) for u in range(3) for i in range(3)] + [("lonely", "i0", 5)]
    d = kcore_filter(dataset_from_triples(triples), min_user=2, min_item=2)
    assert "lonely" not in d.user_ids and len(d) == 9


def _scores(rows, n, m, train=()):
    cand = np.ones((n, m), bool)
    for u, i in train:
        cand[u, i] = False
    values = np.full((n, m), np.nan)
    for (u, i), s in rows.items():
        values[u, i] = s
    return ScoreMatrix(values, cand)


def test_preferences_sorted_by_score():
    p = build_preferences(_scores({(0, 0): 0.9, (0, 1): 0.1, (1, 0): 0.8, (1, 1): 0.2}, 2, 2))
    assert p.user_prefs[0].tolist() == [0, 1]
    assert p.item_prefs[0].tolist() == [0, 1]
    assert p.item_prefs[1].tolist() == [1, 0]


def test_preferences_tie_break_by_index():
    p = build_preferences(_scores({(0, 0): 0.5, (0, 1): 0.5}, 1, 2))
    assert p.user_prefs[0].tolist() == [0, 1]


def test_training_items_never_ranked():
    s = _scores({(0, 0): 0.3, (0, 1): 0.2}, 1, 3, train=[(0, 2)])
    for complete in (False, True):
        p = build_preferences(s, complete=complete)
        assert 2 not in p.user_prefs[0].tolist()


def test_complete_appends_unscored_candidates_on_both_sides():
    s = _scores({(0, 1): 0.3}, 2, 3, train=[(0, 2)])
    p = build_preferences(s, complete=True)
    assert p.user_prefs[0].tolist() == [1, 0]
    assert p.user_prefs[1].tolist() == [0, 1, 2]
    assert p.item_prefs[1].tolist() == [0, 1]
    assert p.item_prefs[2].tolist() == [1]


def test_truncation():
    s = _scores({(0, j): float(j) for j in range(5)}, 1, 5)
    p = build_preferences(s, truncation=2)
    assert p.user_prefs[0].tolist() == [4, 3]


def test_score_matrix_rejects_training_scores():
    with pytest.raises(DataError):
        _scores({(0, 0): 1.0}, 1, 1, train=[(0, 0)])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_preferences_strict_cover_and_order_independent(seed):
    rng = np.random.default_rng(seed)
    n, m = 5, 7
    values = np.round(rng.random((n, m)), 1)  # coarse grid forces ties
    values[rng.random((n, m)) < 0.2] = np.nan
    cand = rng.random((n, m)) < 0.85
    values[~cand] = np.nan
    p = build_preferences(ScoreMatrix(values, cand))
    for u in range(n):
        ranking = p.user_prefs[u].tolist()
        assert len(set(ranking)) == len(ranking)
        assert set(ranking) == set(np.flatnonzero(~np.isnan(values[u])).tolist())
    # rebuilding from a shuffled set of (u, i, s) entries gives the same rankings
    entries = [(u, i, values[u, i]) for u in range(n) for i in range(m) if not np.isnan(values[u, i])]
    rng.shuffle(entries)
    again = np.full((n, m), np.nan)
    for u, i, s in entries:
        again[u, i] = s
    q = build_preferences(ScoreMatrix(again, cand))
    assert all(np.array_equal(a, b) for a, b in zip(p.user_prefs, q.user_prefs))
    assert all(np.array_equal(a, b) for a, b in zip(p.item_prefs, q.item_prefs))


def _prefs(n_users, n_items, length=None):
    length = n_items if length is None else length
    return PreferenceProfile.from_lists(
        [list(range(length)) for _ in range(n_users)], [list(range(n_users)) for _ in range(n_items)]
    )


def test_feasibility_boundary():
    validate_feasibility(_prefs(3, 3), CapacityConfig.uniform(2, 2, 3))


def test_infeasible_capacity():
    with pytest.raises(InfeasibleCapacityError) as err:
        validate_feasibility(_prefs(3, 3), CapacityConfig.per_item(2, [2, 2, 1]))
    assert err.value.total_capacity == 5 and err.value.required == 6


def test_short_preference_list():
    with pytest.raises(ShortPreferenceListError) as err:
        validate_feasibility(_prefs(3, 3, length=1), CapacityConfig.uniform(2, 2, 3))
    assert err.value.length == 1


def test_capacity_invariants():
    with pytest.raises(ConfigError):
        CapacityConfig.uniform(0, 1, 3)
    with pytest.raises(ConfigError):
        CapacityConfig.per_item(1, [1, 0])


def test_lower_bound_cap():
    assert lower_bound_cap(100, 250, 10) == 4
    assert lower_bound_cap(943, 1682, 10) == 6
