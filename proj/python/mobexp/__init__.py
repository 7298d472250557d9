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

"""Contact exposure index and daily SEM estimation."""

from mobexp._core import (
    ConfigError,
    DataError,
    cei_poi_hour,
    contact_duration,
    contact_duration_oracle,
    default_truth,
    file_digest,
    fit,
    implied_covariance,
    ml_discrepancy,
    observed_names,
    param_names,
    run_stage,
    synth_panel,
)

STAGES = (
    "ingest validate",
    "cei compute",
    "cei decompose",
    "sdm aggregate",
    "panel build",
    "sem fit",
    "report emit",
)

__all__ = [
    "ConfigError",
    "DataError",
    "STAGES",
    "cei_poi_hour",
    "contact_duration",
    "contact_duration_oracle",
    "default_truth",
    "file_digest",
    "fit",
    "implied_covariance",
    "ml_discrepancy",
    "observed_names",
    "param_names",
    "run_stage",
    "synth_panel",
]
