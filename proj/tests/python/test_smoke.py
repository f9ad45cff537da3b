# Copyright 2026 The msrec Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
import math
import os
from pathlib import Path

import pytest

import msrec

DATA = Path(os.environ.get("MSREC_TEST_DATA", Path(__file__).resolve().parents[1] / "data"))


def test_version():
    assert msrec.__version__ == "0.1.0"


def test_train_and_rank():
    ds = msrec.parse_ratings("1 1 5\n1 2 3\n2 1 4\n2 3 2\n3 2 5\n3 3 4\n")
    assert len(ds) == 6 and ds.n_users == 3 and ds.n_items == 3
    cfg = msrec.TrainConfig()
    cfg.d, cfg.epochs, cfg.seed = 4, 30, 1
    model = msrec.train_mf(ds, cfg)
    assert math.isfinite(msrec.rmse(model, ds))
    assert 1.0 <= model.predict_rating(0, 2) <= 5.0
    assert sorted(model.top_n(0, [0, 1, 2], 3)) == [0, 1, 2]


def test_greedy_example():
    # Scores 4.8, 4.5, 4.2, 3.9 with margins 1, 3.5, 4, 4.
    out = msrec.rerank_by_profit([0, 1, 2, 3], [4.8, 4.5, 4.2, 3.9], [1.0, 3.5, 4.0, 4.0], 4.0, 2)
    assert out == [2, 1]
    assert msrec.purchase_probability(5.0) == pytest.approx(0.1)
    assert msrec.expected_profit([0, 1], [4, 4], [1.0, 3.0]) == 2.0


def test_kendall_and_fairness_terms():
    assert msrec.kendall_tau([3, 1, 2], [3, 2, 1]) == pytest.approx(1 / 3)
    assert msrec.kendall_kernel([0, 1, 2, 3], [0, 1, 2, 3], 50.0) == pytest.approx(1.0)
    assert len(msrec.phi_map([1, 2, 3, 4])) == 6
    assert msrec.independence("mean_matching", [4, 4], [2, 2]) == -4.0
    assert msrec.independence("bhattacharyya", [-1, 1], [1, 3]) == pytest.approx(-0.5)
    m = msrec.moments([1, 2, 3])
    assert m["mean"] == 2.0 and m["skewness"] == 0.0


def test_errors_are_typed():
    with pytest.raises(msrec.ParseError):
        msrec.parse_ratings("1 2 notanumber\n")
    with pytest.raises(msrec.ConfigError):
        msrec.independence("kl", [1, 2], [3, 4])


def test_golden_experiment(tmp_path):
    assert msrec.validate_config(DATA / "golden.conf") == []
    assert msrec.validate_config(DATA / "broken.conf")
    files = msrec.run_experiment(DATA / "golden.conf", "run", tmp_path)
    again = msrec.run_experiment(DATA / "golden.conf", "run", threads=3)
    assert files == again
    summary = json.loads(files["summary.json"])
    assert summary["seed"] == 7
    assert (tmp_path / "sweep.csv").read_text() == files["sweep.csv"]
    assert files["sweep.csv"].startswith("threshold,avg_profit,f1_at_n,ndcg_at_n\nnone,")
