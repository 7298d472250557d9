# Copyright 2026 The mobexp Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import csv
import itertools
import math
import random

import numpy as np
import pytest

import mobexp


def test_worked_contact_duration():
    assert mobexp.contact_duration([2, 3, 1], [0, 15, 30], [10, 20, 40]) == 210.0
    assert mobexp.contact_duration([0, 2, 4, 0]) == 352.5
    assert mobexp.contact_duration([0, 0, 1, 0]) == 0.0


def test_closed_form_matches_pairs():
    rng = random.Random(3)
    mu = [2.5, 12.5, 40.0, 60.0]
    for _ in range(50):
        n = [rng.randint(0, 8) for _ in mu]
        dwell = [m for m, k in zip(mu, n) for _ in range(k)]
        brute = sum(min(a, b) for a, b in itertools.combinations(dwell, 2))
        assert mobexp.contact_duration(n) == pytest.approx(brute, abs=1e-9)
        assert mobexp.contact_duration_oracle(dwell) == pytest.approx(brute)


def test_cei_and_errors():
    assert mobexp.cei_poi_hour(210.0, 100.0) == pytest.approx(21.0)
    with pytest.raises(mobexp.ConfigError):
        mobexp.contact_duration([1, 1], [0, 5], [10, 20])


def test_fit_synth_panel():
    data = mobexp.synth_panel(seed=11, n_zcta=200)
    assert data.shape == (200, len(mobexp.observed_names()))
    est = mobexp.fit(data)
    assert est["converged"]
    assert est["grad_inf_norm"] < 1e-6
    assert set(est["estimate"]) == set(mobexp.param_names())
    assert len(mobexp.param_names()) == 15
    assert est["estimate"]["beta_S_income"] < 0
    assert all(v > 0 for v in est["std_error"].values())


def test_discrepancy_zero_at_implied():
    data = mobexp.synth_panel(seed=2, n_zcta=100)
    s = np.cov(data, rowvar=False)
    truth = mobexp.default_truth()
    sigma = mobexp.implied_covariance(truth, s[:7, :7])
    assert np.allclose(sigma, sigma.T)
    assert mobexp.ml_discrepancy(truth, sigma) == pytest.approx(0.0, abs=1e-10)
    assert mobexp.ml_discrepancy(truth, s) > 0.0


def test_pipeline_round_trip(tmp_path):
    inp, out = tmp_path / "in", tmp_path / "out"
    common = dict(seed=5, synth_zctas=40, synth_pois=80,
                  start_date="2020-04-01", end_date="2020-04-05")
    assert mobexp.run_stage("synth generate", inp, inp, **common) == 0
    assert mobexp.run_stage("run", inp, out, **common) == 0
    with open(out / "sem_series.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert rows and {r["param_name"] for r in rows} == set(mobexp.param_names())
    assert all(math.isfinite(float(r["estimate"])) for r in rows)
    assert len(mobexp.file_digest(out / "sem_series.csv")) == 64
    assert mobexp.run_stage("sem fit", tmp_path / "none", tmp_path / "none") == 1
