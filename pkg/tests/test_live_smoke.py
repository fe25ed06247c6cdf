"""Optional live smoke test against a real endpoint.

Set SCAUDIT_LIVE_ENDPOINT (and SCAUDIT_API_TOKEN if the endpoint needs auth)
to run a single-category evaluation and check a well-formed table comes out.
Skipped by default: accuracy against live model weights is hardware- and
sampling-dependent and is not part of the offline acceptance gate.
"""
from __future__ import annotations

import os

import pytest

from scaudit.harness import ModelEndpoint, baseline_spec, run_eval, score
from scaudit.metrics import compute_metrics, emit_table
from scaudit.taxonomy import get_category

LIVE = os.environ.get("SCAUDIT_LIVE_ENDPOINT")


@pytest.mark.skipif(not LIVE, reason="SCAUDIT_LIVE_ENDPOINT not set")
def test_live_single_category_run(corpus42):
    subset = corpus42.subset(categories=["bump_seed"])
    endpoint = ModelEndpoint(
        base_url=LIVE,
        model_name=os.environ.get("SCAUDIT_LIVE_MODEL", "model"),
        retries=1,
    )
    records = run_eval(endpoint, subset, baseline_spec(), repetitions=1, concurrency=2)
    assert len(records) == 10
    matrices = score(records, subset)
    rows = {
        ("solana", cat, "baseline", "live"): compute_metrics(cm)
        for cat, cm in matrices.items()
    }
    table = emit_table(rows, "markdown")
    assert get_category("bump_seed").key in table
    assert "Avg." in table
