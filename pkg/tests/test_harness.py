from __future__ import annotations

import random

import pytest

from scaudit.corpus.manifest import MissingRenderingError, Sample
from scaudit.harness import (
    BASELINE,
    ROLE_BASED,
    HarnessError,
    MockResponder,
    ModelEndpoint,
    PredictionRecord,
    RecordsFormatError,
    TransportFailure,
    baseline_spec,
    build_prompt,
    load_records,
    parse_response,
    query,
    role_based_spec,
    run_eval,
    score,
    write_records,
)
from scaudit.metrics import compute_metrics
from scaudit.taxonomy import get_category


def _mock_endpoint(pairs, **kwargs) -> ModelEndpoint:
    kwargs.setdefault("backoff_s", 0.0)
    return ModelEndpoint(base_url="mock:<inline>", _responder=MockResponder.from_pairs(pairs), **kwargs)


def _identity_pairs(manifest):
    pairs = []
    for s in manifest.samples:
        if s.is_vulnerable:
            pairs.append((s.id, f"Detected: {get_category(s.category).display_name}."))
        else:
            pairs.append((s.id, "No vulnerability detected."))
    return pairs


def test_baseline_prompt_shape(corpus42):
    sample = next(s for s in corpus42.samples if s.platform == "solana")
    messages = build_prompt(baseline_spec(), sample)
    assert len(messages) == 1
    assert messages[0]["role"] == "user"
    assert messages[0]["content"].startswith(
        "Can you check if the following smart contract written in Rust"
    )
    assert sample.renderings["llm_source"] in messages[0]["content"]


def test_role_based_prompt_shape(corpus42):
    sample = next(s for s in corpus42.samples if s.platform == "algorand")
    messages = build_prompt(role_based_spec(), sample)
    assert len(messages) == 2
    assert messages[0]["role"] == "system"
    assert messages[0]["content"].startswith("You are a smart contract security analyzer")
    assert "PyTeal" in messages[0]["content"] and "PyTeal" in messages[1]["content"]
    assert sample.renderings["llm_source"] in messages[1]["content"]


def test_missing_rendering_raises():
    bare = Sample(
        id="x", platform="solana", category="bump_seed", label="safe",
        renderings={"analysis_source": "fn f() {}"}, template_id="t", params={},
    )
    with pytest.raises(MissingRenderingError):
        build_prompt(baseline_spec(), bare)


def test_baseline_spec_rejects_system_text():
    from scaudit.harness import PromptSpec
    with pytest.raises(HarnessError):
        PromptSpec(mode=BASELINE, system_text="nope")
    with pytest.raises(HarnessError):
        PromptSpec(mode=BASELINE, user_template="no placeholders here")


def test_mock_scripted_response():
    endpoint = _mock_endpoint([("sample-1", "Unchecked RekeyTo")])
    out = query(endpoint, [], context={"sample_id": "sample-1", "run_index": 1})
    assert out == "Unchecked RekeyTo"


def test_unreachable_endpoint_fails_after_retries():
    endpoint = ModelEndpoint(base_url="http://127.0.0.1:9/v1/chat", retries=1, backoff_s=0.0, timeout=0.5)
    with pytest.raises(TransportFailure) as err:
        query(endpoint, [{"role": "user", "content": "hi"}])
    assert err.value.attempts == 2


def test_two_failures_then_success_with_three_retries():
    responder = MockResponder.from_pairs([("*", "Bump Seed")])
    responder.rules[0].failures_left = 2
    endpoint = ModelEndpoint(base_url="mock:x", retries=3, backoff_s=0.0, _responder=responder)
    out = query(endpoint, [], context={"sample_id": "a", "run_index": 1})
    assert out == "Bump Seed"
    assert len(responder.calls) == 3  # two scripted failures, success on the third attempt


def test_run_eval_one_category_is_thirty_records(corpus42):
    subset = corpus42.subset(categories=["bump_seed"])
    endpoint = _mock_endpoint(_identity_pairs(subset))
    records = run_eval(endpoint, subset, baseline_spec(), repetitions=3, seed=7)
    assert len(records) == 30
    cm = score(records, subset)["bump_seed"]
    assert cm.tp + cm.fn == 15 and cm.fp + cm.tn == 15


def test_run_eval_single_rep_full_manifest(corpus42):
    endpoint = _mock_endpoint([("*", "nothing to report")])
    records = run_eval(endpoint, corpus42, baseline_spec(), repetitions=1, concurrency=8)
    assert len(records) == 130


def test_always_negative_mock_scores_fn_and_tn(corpus42):
    subset = corpus42.subset(categories=["integer_flow"])
    endpoint = _mock_endpoint([("*", "no vulnerability")])
    records = run_eval(endpoint, subset, baseline_spec(), repetitions=3)
    cm = score(records, subset)["integer_flow"]
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (0, 0, 15, 15)


def test_wrong_category_answer_is_false_negative(corpus42):
    subset = corpus42.subset(categories=["unchecked_rekey_to"])
    pairs = []
    for s in subset.samples:
        pairs.append((s.id, "Arbitrary Update" if s.is_vulnerable else "no vulnerability"))
    endpoint = _mock_endpoint(pairs)
    records = run_eval(endpoint, subset, baseline_spec(), repetitions=3)
    cm = score(records, subset)["unchecked_rekey_to"]
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (0, 0, 15, 15)
    row = compute_metrics(cm).rounded()
    assert row == (0.50, 0.00, 0.00, 0.00)


def test_safe_sample_any_detection_is_false_positive(corpus42):
    subset = corpus42.subset(categories=["unchecked_transaction_fee"])
    pairs = []
    for s in subset.samples:
        pairs.append((s.id, "no vulnerability" if s.is_vulnerable else "Unchecked Transaction Fee"))
    endpoint = _mock_endpoint(pairs)
    records = run_eval(endpoint, subset, baseline_spec(), repetitions=3)
    cm = score(records, subset)["unchecked_transaction_fee"]
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (0, 15, 15, 0)


def test_scripted_nine_of_fifteen_gives_expected_matrix(corpus42):
    subset = corpus42.subset(categories=["bump_seed"])
    display = get_category("bump_seed").display_name
    vuln_ids = sorted(s.id for s in subset.samples if s.is_vulnerable)
    slots = [(sid, run) for sid in vuln_ids for run in (1, 2, 3)]
    correct = set(slots[:9])  # exactly nine correct answers, counted by hand
    pairs = []
    for sid, run in slots:
        response = display if (sid, run) in correct else "no vulnerability here"
        pairs.append((f"{sid}#{run}", response))
    pairs.append(("*", "No vulnerability detected."))
    endpoint = _mock_endpoint(pairs)
    records = run_eval(endpoint, subset, baseline_spec(), repetitions=3)
    cm = score(records, subset)["bump_seed"]
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (9, 0, 6, 15)
    assert compute_metrics(cm).rounded() == (0.80, 1.00, 0.60, 0.75)


def test_conservation_per_category(corpus42):
    endpoint = _mock_endpoint(_identity_pairs(corpus42))
    records = run_eval(endpoint, corpus42, baseline_spec(), repetitions=2, concurrency=8)
    for category, cm in score(records, corpus42).items():
        assert cm.total == 2 * 2 * 5, category


def test_score_is_order_independent(corpus42):
    subset = corpus42.subset(categories=["cpi_unchecked", "type_confusion"])
    endpoint = _mock_endpoint(_identity_pairs(subset))
    records = run_eval(endpoint, subset, baseline_spec(), repetitions=3)
    baseline = score(records, subset)
    for seed in (1, 2, 3):
        shuffled = records[:]
        random.Random(seed).shuffle(shuffled)
        assert score(shuffled, subset) == baseline


def test_predicted_iff_parsed(corpus42):
    endpoint = _mock_endpoint(_identity_pairs(corpus42))
    records = run_eval(endpoint, corpus42, baseline_spec(), repetitions=1)
    for r in records:
        assert r.predicted_vulnerable == (r.parsed_category is not None)


def test_identity_mock_scores_perfectly(corpus42):
    endpoint = _mock_endpoint(_identity_pairs(corpus42))
    records = run_eval(endpoint, corpus42, baseline_spec(), repetitions=3, concurrency=8)
    for category, cm in score(records, corpus42).items():
        assert compute_metrics(cm).rounded() == (1.0, 1.0, 1.0, 1.0), category


def test_negative_phrase_short_circuits_aliases():
    # The negative phrasing wins even if a category name also appears.
    assert parse_response("There is no vulnerability; rekey fields are fine.", "algorand") is None
    assert parse_response("Unchecked RekeyTo", "algorand") == "unchecked_rekey_to"


def test_error_records_kept_and_scored_as_abstention(corpus42):
    subset = corpus42.subset(categories=["missing_key_check"])
    responder = MockResponder.from_pairs([("*", "unused")])
    responder.rules[0].failures_left = 10_000
    endpoint = ModelEndpoint(base_url="mock:x", retries=0, backoff_s=0.0, _responder=responder)
    records = run_eval(endpoint, subset, baseline_spec(), repetitions=1, concurrency=1)
    assert len(records) == 10
    assert all(r.error for r in records)
    cm = score(records, subset)["missing_key_check"]
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (0, 0, 5, 5)


def test_records_round_trip(tmp_path, corpus42):
    subset = corpus42.subset(categories=["bump_seed"])
    endpoint = _mock_endpoint([("*", 'tricky|response\nwith "newline"')])
    records = run_eval(endpoint, subset, baseline_spec(), repetitions=2)
    path = tmp_path / "preds.txt"
    write_records(records, path)
    assert load_records(path) == records


def test_records_header_required(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not-a-header\n", encoding="utf-8")
    with pytest.raises(RecordsFormatError):
        load_records(path)


def test_run_eval_is_repeatable(corpus42):
    subset = corpus42.subset(categories=["bump_seed"])
    pairs = _identity_pairs(subset)
    first = run_eval(_mock_endpoint(pairs), subset, baseline_spec(), repetitions=3, seed=5)
    second = run_eval(_mock_endpoint(pairs), subset, baseline_spec(), repetitions=3, seed=5)
    strip = lambda rs: [(r.sample_id, r.run_index, r.parsed_category, r.predicted_vulnerable) for r in rs]
    assert strip(first) == strip(second)
