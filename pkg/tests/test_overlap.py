import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import make_dataset
from kmproxy import overlap as O
from kmproxy.distances import COSINE, L2
from kmproxy.errors import DataError


def ds_from(rows, name="d", prefix="p"):
    rows = np.asarray(rows, dtype=np.float32)
    return make_dataset(rows, np.zeros(len(rows), dtype=np.int64),
                        name=name, num_classes=1, prefix=prefix)


class TestWorkedExamples:
    def test_separated_sets_low_overlap(self):
        # two tight groups far apart: own set always closer
        a = ds_from([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]], "a")
        b = ds_from([[50.0, 50.0], [50.1, 50.0], [50.0, 50.1]], "b", prefix="q")
        rep = O.directional_overlap(a, b, L2)
        assert rep.p_a == 0.0 and rep.p_b == 0.0
        assert rep.o_bidirectional == 0.0
        assert rep.o_directional == 0.0

    def test_interleaved_sets_high_overlap(self):
        # each point's nearest neighbor lives in the other set
        a = ds_from([[0.0], [2.0], [4.0]], "a")
        b = ds_from([[0.4], [2.4], [4.4]], "b", prefix="q")
        rep = O.directional_overlap(a, b, L2)
        assert rep.p_a == 1.0 and rep.p_b == 1.0

    def test_hand_computed_ratios(self):
        a = ds_from([[0.0], [1.0]], "a")
        b = ds_from([[0.25], [9.0]], "b", prefix="q")
        rows = O.per_point_ratios(a, b, L2)
        # point 0: w=1, b=0.25 -> 4;  point 1: w=1, b=0.75 -> 4/3
        assert rows[0].ratio == pytest.approx(4.0)
        assert rows[1].ratio == pytest.approx(4.0 / 3.0)

    def test_duplicate_across_sets_ratio_conventions(self):
        # a0 duplicates b0 and a1 duplicates a2: both b=0 branches
        a = ds_from([[0.0], [5.0], [5.0]], "a")
        b = ds_from([[0.0], [99.0]], "b", prefix="q")
        rows = O.per_point_ratios(a, b, L2)
        assert rows[0].b == 0.0 and rows[0].w > 0.0 and math.isinf(rows[0].ratio)
        # a1's nearest-other in A is its duplicate a2 (w=0) and b=5 -> ratio 0
        assert rows[1].w == 0.0 and rows[1].ratio == 0.0

    def test_exact_duplicate_in_both_sets_scores_one(self):
        a = ds_from([[1.0], [1.0]], "a")
        b = ds_from([[1.0]], "b", prefix="q")
        rows = O.per_point_ratios(a, b, L2)
        # w=0 and b=0: defined as ratio 1, which does not exceed 1
        assert rows[0].ratio == 1.0
        assert rows[1].ratio == 1.0

    def test_strictly_greater_than_one_required(self):
        # symmetric geometry: w == b exactly -> ratio 1 -> not counted
        a = ds_from([[0.0], [2.0]], "a")
        b = ds_from([[4.0], [6.0]], "b", prefix="q")
        rep = O.directional_overlap(a, b, L2)
        assert rep.p_a == 0.0

    def test_bidirectional_is_average_and_directional_is_p_a(self):
        a = ds_from([[0.0], [10.0]], "a")
        b = ds_from([[0.1], [0.2], [0.3]], "b", prefix="q")
        rep = O.directional_overlap(a, b, L2)
        assert rep.o_bidirectional == pytest.approx((rep.p_a + rep.p_b) / 2)
        assert rep.o_directional == rep.p_a


class TestAgainstOracle:
    @pytest.mark.parametrize("metric", [L2, COSINE])
    def test_random_pair_exact(self, metric):
        rng = np.random.default_rng(21)
        a = ds_from(rng.standard_normal((60, 4)) + 1.0, "a")
        b = ds_from(rng.standard_normal((45, 4)) + 1.2, "b", prefix="q")
        rep = O.directional_overlap(a, b, metric)
        p_a, p_b = oracles.overlap_naive(a.vectors, b.vectors, metric)
        assert rep.p_a == p_a
        assert rep.p_b == p_b

    @settings(max_examples=15, deadline=None)
    @given(
        na=st.integers(2, 20),
        nb=st.integers(2, 20),
        d=st.integers(1, 4),
        seed=st.integers(0, 2**31),
    )
    def test_property_matches_oracle(self, na, nb, d, seed):
        rng = np.random.default_rng(seed)
        a = ds_from(rng.standard_normal((na, d)) + 2.0, "a")
        b = ds_from(rng.standard_normal((nb, d)) + 2.0, "b", prefix="q")
        for metric in (L2, COSINE):
            rep = O.directional_overlap(a, b, metric)
            p_a, p_b = oracles.overlap_naive(a.vectors, b.vectors, metric)
            assert (rep.p_a, rep.p_b) == (p_a, p_b)
            assert 0.0 <= rep.p_a <= 1.0 and 0.0 <= rep.p_b <= 1.0


class TestProperties:
    def test_identical_sets_fully_overlap(self):
        rng = np.random.default_rng(22)
        pts = rng.standard_normal((30, 3))
        a = ds_from(pts, "a")
        b = ds_from(pts, "b", prefix="q")
        rep = O.directional_overlap(a, b, L2)
        # every point has an exact copy in the other set: b=0, w>0 -> inf
        assert rep.p_a == 1.0 and rep.p_b == 1.0 and rep.o_bidirectional == 1.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(23)
        pts_a = rng.standard_normal((25, 3))
        pts_b = rng.standard_normal((19, 3))
        a1, b1 = ds_from(pts_a, "a"), ds_from(pts_b, "b", prefix="q")
        perm = rng.permutation(25)
        a2 = ds_from(pts_a[perm], "a2")
        rep1 = O.directional_overlap(a1, b1, L2)
        rep2 = O.directional_overlap(a2, b1, L2)
        assert rep1.p_a == rep2.p_a and rep1.p_b == rep2.p_b


class TestValidation:
    def test_dim_mismatch(self):
        with pytest.raises(DataError, match="dim mismatch"):
            O.directional_overlap(ds_from([[1.0], [2.0]]), ds_from([[1.0, 2.0]] * 2))

    def test_singleton_set_rejected(self):
        a = ds_from([[1.0]])
        b = ds_from([[1.0], [2.0]])
        with pytest.raises(DataError, match=">= 2 records"):
            O.directional_overlap(a, b, L2)
        with pytest.raises(DataError, match=">= 2 records"):
            O.directional_overlap(b, a, L2)

    def test_per_point_allows_singleton_reference(self):
        rows = O.per_point_ratios(ds_from([[0.0], [1.0]]), ds_from([[5.0]]), L2)
        assert len(rows) == 2


class TestSerialization:
    def test_json_report(self, tmp_path):
        a = ds_from([[0.0], [1.0]], "a")
        b = ds_from([[0.0], [9.0]], "b", prefix="q")
        rep = O.directional_overlap(a, b, L2, include_per_point=True)
        path = tmp_path / "r.json"
        O.write_overlap_json(rep, path)
        obj = json.loads(path.read_text())
        assert set(obj) == {"metric", "p_a", "p_b", "o_bidirectional", "o_directional", "per_point"}
        # a0 duplicates b0: w=1, b=0 -> infinite ratio serialized as "inf"
        assert obj["per_point"][0]["ratio"] == "inf"

    def test_json_report_without_per_point(self, tmp_path):
        a = ds_from([[0.0], [1.0]], "a")
        b = ds_from([[3.0], [9.0]], "b", prefix="q")
        path = tmp_path / "r.json"
        O.write_overlap_json(O.directional_overlap(a, b, L2), path)
        assert "per_point" not in json.loads(path.read_text())

    def test_tsv_round_trippable(self, tmp_path):
        a = ds_from([[0.0], [1.0]], "a")
        b = ds_from([[0.0], [9.0]], "b", prefix="q")
        rows = O.per_point_ratios(a, b, L2)
        path = tmp_path / "pp.tsv"
        O.write_per_point_tsv(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "id\tw\tb\tratio"
        assert len(lines) == 3
        cells = lines[1].split("\t")
        assert cells[0] == rows[0].id
        assert cells[3] == "inf"
        # repr round-trips float64 exactly
        assert float(lines[2].split("\t")[1]) == rows[1].w
