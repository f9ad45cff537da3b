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

"""Multistakeholder recommendation: baseline MF, profit-aware re-ranking,
fairness-regularized training and stakeholder metrics."""

from ._msrec import (
    ConfigError,
    ContractError,
    Error,
    FactorModel,
    ParseError,
    RatingsDataset,
    TrainConfig,
    __version__,
    expected_profit,
    independence,
    kendall_kernel,
    kendall_tau,
    lambdarank_loss,
    load_ratings,
    moments,
    ndcg_at_n,
    parse_ratings,
    phi_map,
    phi_smooth,
    purchase_probability,
    rerank_by_profit,
    rmse,
    run_experiment,
    train_mf,
    validate_config,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "Error",
    "FactorModel",
    "ParseError",
    "RatingsDataset",
    "TrainConfig",
    "__version__",
    "expected_profit",
    "independence",
    "kendall_kernel",
    "kendall_tau",
    "lambdarank_loss",
    "load_ratings",
    "moments",
    "ndcg_at_n",
    "parse_ratings",
    "phi_map",
    "phi_smooth",
    "purchase_probability",
    "rerank_by_profit",
    "rmse",
    "run_experiment",
    "train_mf",
    "validate_config",
]
