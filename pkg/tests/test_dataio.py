import logging

import numpy as np
import pytest

from sparsedp.dataio import (
    DataError,
    EmptyDatasetError,
    MalformedHeaderError,
    MissingTargetError,
    load_csv,
    synthesize_classification,
    synthesize_regression,
)
from sparsedp.models import ModelSpec, ParamDomain, solve_optimum
from sparsedp.numkit import Rng


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_categorical_first_appearance(self, tmp_path):
        path = write(tmp_path, "id,state,amount,y\n1,CA,2.0,1\n2,NY,3.0,0\n3,CA,4.0,1\n")
        ds = load_csv(path, "y", drop_columns=["id"], categorical_columns=["state"], standardize=False)
        assert ds.column_names == ["state", "amount"]
        np.testing.assert_array_equal(ds.features[:, 0], [0, 1, 0])
        assert ds.encoding_map == {"state": {"CA": 0, "NY": 1}}

    def test_malformed_row_dropped(self, tmp_path, caplog):
        path = write(tmp_path, "a,b,y\n1,2,3\n4,oops,6\n7,8,9\n")
        with caplog.at_level(logging.WARNING):
            ds = load_csv(path, "y", standardize=False)
        assert ds.n == 2 and ds.dropped_rows == 1
        assert "dropped 1" in caplog.text

    @pytest.mark.parametrize("row", ["1,,3", "1,2", "1,2,3,4", "1,nan,3", "1,inf,3"])
    def test_bad_rows(self, tmp_path, row):
        ds = load_csv(write(tmp_path, f"a,b,y\n1,2,3\n{row}\n"), "y", standardize=False)
        assert ds.n == 1 and ds.dropped_rows == 1

    def test_round_trip(self, tmp_path):
        raw = ["TX", "CA", "TX", "NY", "CA"]
        body = "".join(f"{s},{i},{i % 2}\n" for i, s in enumerate(raw))
        ds = load_csv(write(tmp_path, "state,v,y\n" + body), "y", categorical_columns=["state"], standardize=False)
        mapping = ds.encoding_map["state"]
        np.testing.assert_array_equal([mapping[s] for s in raw], ds.features[:, 0])
        assert len(set(mapping.values())) == len(mapping)

    def test_standardize(self, tmp_path):
        ds = load_csv(write(tmp_path, "a,b,y\n1,10,0\n2,10,1\n3,10,2\n"), "y")
        np.testing.assert_allclose(ds.features.mean(axis=0), 0, atol=1e-15)
        np.testing.assert_allclose(ds.features[:, 0].std(), 1.0)
        # constant columns are centred but not scaled
        np.testing.assert_array_equal(ds.features[:, 1], 0)
        assert ds.standardization["a"] == pytest.approx((2.0, np.sqrt(2 / 3)))

    def test_quoted_cells(self, tmp_path):
        ds = load_csv(write(tmp_path, 'name,a,y\n"Smith, J",1,2\n"Lee",3,4\n'), "y",
                      categorical_columns=["name"], standardize=False)
        assert ds.encoding_map["name"] == {"Smith, J": 0, "Lee": 1}

    def test_deterministic(self, tmp_path):
        path = write(tmp_path, "s,a,y\nx,1,2\ny,3,4\nx,5,7\n")
        a = load_csv(path, "y", categorical_columns=["s"])
        b = load_csv(path, "y", categorical_columns=["s"])
        assert a.features.tobytes() == b.features.tobytes()
        assert a.targets.tobytes() == b.targets.tobytes()

    def test_missing_target(self, tmp_path):
        with pytest.raises(MissingTargetError):
            load_csv(write(tmp_path, "a,b\n1,2\n"), "y")

    @pytest.mark.parametrize("text", ["", "a,,y\n1,2,3\n", "a,a,y\n1,2,3\n"])
    def test_malformed_header(self, tmp_path, text):
        with pytest.raises(MalformedHeaderError):
            load_csv(write(tmp_path, text), "y")

    def test_unknown_drop_column(self, tmp_path):
        with pytest.raises(MalformedHeaderError):
            load_csv(write(tmp_path, "a,y\n1,2\n"), "y", drop_columns=["zzz"])

    def test_empty(self, tmp_path):
        with pytest.raises(EmptyDatasetError):
            load_csv(write(tmp_path, "a,y\nq,r\n"), "y")
        with pytest.raises(EmptyDatasetError):
            load_csv(write(tmp_path, "a,y\n"), "y")

    def test_error_kinds_distinct(self):
        kinds = {MalformedHeaderError, MissingTargetError, EmptyDatasetError}
        assert len(kinds) == 3 and all(issubclass(k, DataError) for k in kinds)


class TestSynthetic:
    def test_noise_free_truth_recovered(self):
        ds, truth = synthesize_regression(Rng(1), 500, 10, 0.0, 4.0)
        assert np.linalg.norm(truth) == pytest.approx(1.0)
        theta = solve_optimum(ModelSpec("linear_regression", 10), ds, ParamDomain.ball(10, 100))
        assert np.linalg.norm(theta - truth) <= 1e-6

    def test_deterministic(self):
        a, ta = synthesize_regression(Rng(2), 50, 4)
        b, tb = synthesize_regression(Rng(2), 50, 4)
        assert a.features.tobytes() == b.features.tobytes() and a.targets.tobytes() == b.targets.tobytes()
        assert np.array_equal(ta, tb)
        c, _ = synthesize_regression(Rng(3), 50, 4)
        assert not np.array_equal(a.features, c.features)

    def test_condition_number(self):
        ds, _ = synthesize_regression(Rng(0), 10_000, 64, 1.0, 10.0)
        s = np.linalg.svd(ds.features, compute_uv=False)
        assert 5 <= s[0] / s[-1] <= 20

    def test_noise_level(self):
        ds, truth = synthesize_regression(Rng(4), 20_000, 3, 2.0, 1.0)
        assert np.std(ds.targets - ds.features @ truth) == pytest.approx(2.0, rel=0.03)

    def test_errors(self):
        with pytest.raises(ValueError):
            synthesize_regression(Rng(0), 3, 5)
        with pytest.raises(ValueError):
            synthesize_regression(Rng(0), 10, 2, -1.0)
        with pytest.raises(ValueError):
            synthesize_regression(Rng(0), 10, 2, 1.0, 0.5)

    def test_classification_labels(self):
        ds, truth = synthesize_classification(Rng(5), 2000, 6, flip_prob=0.1)
        assert set(np.unique(ds.targets)) == {-1.0, 1.0}
        agree = np.mean(np.where(ds.features @ truth >= 0, 1.0, -1.0) == ds.targets)
        assert agree == pytest.approx(0.9, abs=0.03)
