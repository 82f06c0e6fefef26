# Copyright (C) 2026 The metasel Authors
# SPDX-License-Identifier: Apache-2.0
"""Demonstration selection for few-shot intent classification."""

import json

from ._core import (
    BackendError,
    DataError,
    Dataset,
    Error,
    MetaSelModel,
    TextIndex,
    build_prompt,
    challenge_subset,
    fit_logistic,
    generate_request_body,
    label_agreement_at_k,
    load_dataset,
    load_model,
    model_from_bytes,
    parse_label,
    sample_meta_split,
    save_dataset,
    selector_kinds,
    sigmoid,
    success_probability,
    synthetic_corpus,
    tokenize,
    train_metasel,
)

__version__ = "0.1.0"


def run_experiment(config, train=None, queries=None):
    """Runs a benchmark and returns the report as a dict.

    With ``train`` and ``queries`` the config's paths are ignored and nothing
    is written; otherwise ``config`` is a path to a run config file.
    """
    from ._core import _run_experiment, _run_experiment_file

    if train is None:
        return json.loads(_run_experiment_file(str(config)))
    if not isinstance(config, str):
        config = json.dumps(config)
    return json.loads(_run_experiment(config, train, queries))


__all__ = [
    "BackendError",
    "DataError",
    "Dataset",
    "Error",
    "MetaSelModel",
    "TextIndex",
    "build_prompt",
    "challenge_subset",
    "fit_logistic",
    "generate_request_body",
    "label_agreement_at_k",
    "load_dataset",
    "load_model",
    "model_from_bytes",
    "parse_label",
    "run_experiment",
    "sample_meta_split",
    "save_dataset",
    "selector_kinds",
    "sigmoid",
    "success_probability",
    "synthetic_corpus",
    "tokenize",
    "train_metasel",
]
