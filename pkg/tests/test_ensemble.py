import hashlib
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import stpatterns.ensemble as ens
from conftest import WINDOW_STEPS, brute_count, random_pattern
from stpatterns import (
    CapacityError,
    ChecksumError,
    ContractViolation,
    EnsembleFormatError,
    SpatioTemporalPattern,
    TrajectoryWindow,
    build_ensemble,
    evifpp,
    load_ensemble,
    save_ensemble,
)
from stpatterns.ensemble import initial_states, trajectory_window


def test_single_cell_torus():
    # a lone live cell sees itself eight times and dies; a dead one stays dead
    tab = build_ensemble(1, 1, 0, 2)
    assert tab.windows.tolist() == [[0, 0], [1, 0]]
    assert tab.counts.tolist() == [1, 1]
    later = build_ensemble(1, 1, 1, 3)
    assert later.windows.tolist() == [[0, 0, 0]]
    assert later.counts.tolist() == [2]


def test_time_zero_window_is_every_state_once():
    tab = build_ensemble(4, 4, 0, 1)
    assert len(tab) == 1 << 16
    assert np.all(tab.counts == 1)
    assert np.array_equal(tab.windows[:, 0], np.arange(1 << 16, dtype=np.uint64))


def test_counts_sum_and_sorted(tab):
    assert int(tab.counts.sum()) == 1 << 16
    assert np.all(tab.counts >= 1)
    rows = [tuple(r) for r in tab.windows.tolist()]
    assert rows == sorted(rows)
    assert len(set(rows)) == len(rows)


def test_blank_window_matches_brute_force(tab, brute):
    blank = TrajectoryWindow(WINDOW_STEPS, (0, 0, 0), 4, 4)
    assert tab.multiplicity(blank) == int(np.all(brute == 0, axis=1).sum())


@pytest.mark.parametrize("start", [7, 8])
def test_blank_window_evifpp_near_published(start):
    # both readings of the window start give a blank-pattern value near 4.9 bits
    tab = build_ensemble(4, 4, start, 3)
    blank = TrajectoryWindow(start, (0, 0, 0), 4, 4).pattern()
    assert abs(evifpp(tab, blank).value - 4.9) <= 0.05


def test_all_marginals_match_brute_force(tab, brute):
    m = tab.marginals
    assert m.ones.shape == (3, 16)
    assert np.array_equal(m.ones.ravel(), brute.sum(axis=0))
    t, site = WINDOW_STEPS + 1, 5
    assert m.count(t, site, 0) + m.count(t, site, 1) == 1 << 16


def test_random_patterns_match_brute_force(tab, brute):
    rng = np.random.default_rng(11)
    for size in (1, 2, 5, 9, 20, 48):
        for occurring in (True, False):
            pat = random_pattern(rng, brute, size, occurring=occurring)
            assert tab.pattern_count(pat) == brute_count(brute, pat)


def test_empty_pattern_has_probability_one(tab):
    assert tab.pattern_probability(SpatioTemporalPattern(())) == 1


def test_pattern_outside_window_rejected(tab):
    with pytest.raises(ContractViolation):
        tab.pattern_count(SpatioTemporalPattern.from_mapping({(WINDOW_STEPS + 3, 0): 1}))
    with pytest.raises(ContractViolation):
        tab.pattern_count(SpatioTemporalPattern.from_mapping({(WINDOW_STEPS, 0): 2}))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), size=st.integers(2, 20))
def test_adding_nodes_never_raises_probability(tab, brute, seed, size):
    rng = np.random.default_rng(seed)
    pat = random_pattern(rng, brute, size)
    nodes = pat.nodes
    probs = [tab.pattern_probability(pat.restrict(nodes[:k])) for k in range(len(nodes) + 1)]
    assert all(a >= b for a, b in zip(probs, probs[1:]))


def test_initial_states_reach_the_window(tab):
    for i in (0, len(tab) // 2, len(tab) - 1):
        win = tab.window(i)
        states = initial_states(4, 4, win)
        assert len(states) == tab.counts[i]
        for s in states[:5]:
            assert trajectory_window(int(s), 4, 4, WINDOW_STEPS, 3) == win


def test_worker_count_does_not_change_table(monkeypatch, tab):
    monkeypatch.setattr(ens, "_CHUNK", 1 << 12)
    assert build_ensemble(4, 4, WINDOW_STEPS, 3, workers=1) == tab
    assert build_ensemble(4, 4, WINDOW_STEPS, 3, workers=4) == tab


def test_capacity_limit():
    with pytest.raises(CapacityError, match="25 cells"):
        build_ensemble(6, 5, 0, 1)
    with pytest.raises(ContractViolation):
        build_ensemble(0, 4, 0, 1)
    with pytest.raises(ContractViolation):
        build_ensemble(2, 2, 0, 0)


def test_save_load_round_trip(tmp_path, tab):
    path = save_ensemble(tab, tmp_path / "sub" / "e.bin")
    again = load_ensemble(path, width=4, height=4, start=WINDOW_STEPS, length=3, rule="B3/S23")
    assert again == tab
    assert not list((tmp_path / "sub").glob("*.tmp"))


def test_truncated_cache_rejected(tmp_path, tab):
    path = save_ensemble(tab, tmp_path / "e.bin")
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(ChecksumError):
        load_ensemble(path)
    path.write_bytes(raw[:10])
    with pytest.raises(ChecksumError):
        load_ensemble(path)


def test_flipped_byte_rejected(tmp_path, tab):
    path = save_ensemble(tab, tmp_path / "e.bin")
    raw = bytearray(path.read_bytes())
    raw[100] ^= 1
    path.write_bytes(bytes(raw))
    with pytest.raises(ChecksumError):
        load_ensemble(path)


def test_metadata_mismatch_rejected(tmp_path, tab):
    path = save_ensemble(tab, tmp_path / "e.bin")
    with pytest.raises(EnsembleFormatError, match="rule"):
        load_ensemble(path, rule="B36/S23")
    with pytest.raises(EnsembleFormatError, match="width"):
        load_ensemble(path, width=5)
    with pytest.raises(EnsembleFormatError, match="start"):
        load_ensemble(path, start=WINDOW_STEPS + 1)


def _rewrite(path, mutate):
    data = bytearray(path.read_bytes()[:-32])
    mutate(data)
    path.write_bytes(bytes(data) + hashlib.sha256(bytes(data)).digest())


def test_unknown_version_and_bad_magic(tmp_path, tab):
    path = save_ensemble(tab, tmp_path / "e.bin")
    _rewrite(path, lambda d: struct.pack_into("<H", d, 8, 99))
    with pytest.raises(EnsembleFormatError, match="version"):
        load_ensemble(path)
    path = save_ensemble(tab, tmp_path / "f.bin")
    _rewrite(path, lambda d: d.__setitem__(0, ord("X")))
    with pytest.raises(EnsembleFormatError, match="not an ensemble"):
        load_ensemble(path)


def test_inconsistent_counts_rejected(tmp_path, tab):
    path = save_ensemble(tab, tmp_path / "e.bin")
    _rewrite(path, lambda d: struct.pack_into("<Q", d, len(d) - 8, 1 + int(tab.counts[-1])))
    with pytest.raises(EnsembleFormatError, match="sum"):
        load_ensemble(path)


def test_probability_is_exact_fraction(tab):
    win = tab.window(0)
    p = tab.pattern_probability(win.pattern())
    assert p.denominator * int(tab.counts[0]) == (1 << 16) * p.numerator
    assert math.isclose(float(p), tab.counts[0] / 65536)
