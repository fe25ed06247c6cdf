"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (see conftest) and enforcing its runtime budget."""
from __future__ import annotations

import time

import pytest

from scaudit.cli import main
from scaudit.corpus import generate, load_manifest, validate, write_manifest
from scaudit.harness import (
    MockResponder,
    ModelEndpoint,
    baseline_spec,
    run_eval,
    score,
)
from scaudit.metrics import (
    ConfusionMatrix,
    compute_metrics,
    platform_averages,
    reconstruct_cm,
    reference_rows,
    reference_table_path,
    round2,
)
from scaudit.taxonomy import eval_categories, get_category
from scaudit.teal import parse_teal, pretty_print
from scaudit.teal.parser import (
    DUPLICATE_LABEL,
    MALFORMED_IMMEDIATE,
    UNDEFINED_BRANCH_TARGET,
    UNKNOWN_OPCODE,
    TealParseError,
)


def test_metrics_oracle():
    """metrics oracle reproduces the reference confusion-matrix rows (<1s)"""
    started = time.perf_counter()
    assert compute_metrics(ConfusionMatrix(9, 0, 6, 15)).rounded() == (0.80, 1.00, 0.60, 0.75)
    assert compute_metrics(ConfusionMatrix(2, 0, 13, 15)).rounded() == (0.57, 1.00, 0.13, 0.24)
    assert time.perf_counter() - started < 1.0


def test_table_consistency():
    """every DeepSeek reference row admits an integer matrix at 15+15 (<5s)"""
    started = time.perf_counter()
    rows = {k: v for k, v in reference_rows("table3").items() if k[3] == "deepseek"}
    assert len(rows) == 13
    for key, row in rows.items():
        matches = reconstruct_cm(row, 15, 15)
        assert matches, key
        for cm in matches:
            assert compute_metrics(cm).rounded() == row.rounded(), key
    assert time.perf_counter() - started < 5.0


def test_average_reproduction():
    """per-platform average accuracies match the reference (0.63/0.53, 0.60/0.50)"""
    averages = {k: round2(v) for k, v in platform_averages(reference_rows("table3")).items()}
    assert averages[("solana", "baseline", "deepseek")] == 0.63
    assert averages[("solana", "baseline", "llama")] == 0.53
    assert averages[("algorand", "baseline", "deepseek")] == 0.60
    assert averages[("algorand", "baseline", "llama")] == 0.50


def test_corpus_ground_truth():
    """generate(seed,5) yields 130 samples, analyzers agree with every label (<10s)"""
    started = time.perf_counter()
    manifest = generate(20250808, 5)
    assert len(manifest.samples) == 130
    report = validate(manifest)
    assert report.balance_violations == []
    assert report.ground_truth_violations == []
    assert time.perf_counter() - started < 10.0


def test_protocol_arithmetic(corpus42):
    """3 repetitions over one category produce 30 records, 15 positives and 15 negatives"""
    subset = corpus42.subset(categories=["unchecked_rekey_to"])
    assert len(subset.samples) == 10
    pairs = [
        (s.id, f"{get_category(s.category).display_name}" if s.is_vulnerable else "no vulnerability")
        for s in subset.samples
    ]
    endpoint = ModelEndpoint(base_url="mock:x", backoff_s=0.0, _responder=MockResponder.from_pairs(pairs))
    records = run_eval(endpoint, subset, baseline_spec(), repetitions=3, seed=1)
    assert len(records) == 30
    cm = score(records, subset)["unchecked_rekey_to"]
    assert cm.tp + cm.fn == 15
    assert cm.fp + cm.tn == 15


def _other_category(category: str, platform: str) -> str:
    for cat in eval_categories(platform):
        if cat.key != category:
            return cat.display_name
    raise AssertionError("platform has a single category")


def test_strict_scoring_rule(tmp_path, corpus42):
    """wrong-but-valid answers on vulnerable samples score recall 0, precision 0, accuracy 0.50"""
    corpus_path = tmp_path / "corpus.jsonl"
    write_manifest(corpus42, corpus_path)
    script_lines = []
    for sample in corpus42.samples:
        if sample.is_vulnerable:
            wrong = _other_category(sample.category, sample.platform)
            script_lines.append(f"{sample.id}|The issue is {wrong}.")
    script_lines.append("*|No vulnerability detected.")
    script = tmp_path / "wrong.mock"
    script.write_text("\n".join(script_lines) + "\n", encoding="utf-8")

    preds = tmp_path / "preds.txt"
    assert main(["eval", "--manifest", str(corpus_path), "--endpoint", f"mock:{script}",
                 "--reps", "3", "--out", str(preds)]) == 0

    from scaudit.harness import load_records
    records = load_records(preds)
    matrices = score(records, corpus42)
    assert len(matrices) == 13
    for category, cm in matrices.items():
        row = compute_metrics(cm).rounded()
        assert row[0] == 0.50, category   # accuracy
        assert row[1] == 0.00, category   # precision
        assert row[2] == 0.00, category   # recall


def _script_from_matrices(manifest, matrices: dict[str, ConfusionMatrix]) -> str:
    """Mock script realizing exact per-category matrices over 3 repetitions."""
    lines = []
    for category, cm in matrices.items():
        display = get_category(category).display_name
        vuln = sorted(s.id for s in manifest.samples if s.category == category and s.is_vulnerable)
        safe = sorted(s.id for s in manifest.samples if s.category == category and not s.is_vulnerable)
        vuln_slots = [(sid, run) for sid in vuln for run in (1, 2, 3)]
        safe_slots = [(sid, run) for sid in safe for run in (1, 2, 3)]
        assert len(vuln_slots) == cm.tp + cm.fn and len(safe_slots) == cm.fp + cm.tn
        for index, (sid, run) in enumerate(vuln_slots):
            answer = display if index < cm.tp else "No vulnerability found."
            lines.append(f"{sid}#{run}|{answer}")
        for index, (sid, run) in enumerate(safe_slots):
            answer = display if index < cm.fp else "No vulnerability found."
            lines.append(f"{sid}#{run}|{answer}")
    return "\n".join(lines) + "\n"


def test_end_to_end_regression(tmp_path, capsys):
    """mock scripts reconstructed from the reference tables reproduce them exactly (<30s)"""
    started = time.perf_counter()
    corpus_path = tmp_path / "corpus.jsonl"
    assert main(["corpus-gen", "--seed", "42", "--per-class", "5", "--out", str(corpus_path)]) == 0
    manifest = load_manifest(corpus_path)

    reference = reference_rows("table3")
    for model in ("deepseek", "llama"):
        matrices = {}
        for (platform, category, config, mdl), row in reference.items():
            if mdl != model:
                continue
            matches = reconstruct_cm(row, 15, 15)
            assert matches, (category, model)
            matrices[category] = matches[0]
        script = tmp_path / f"{model}.mock"
        script.write_text(_script_from_matrices(manifest, matrices), encoding="utf-8")

        preds = tmp_path / f"preds_{model}.txt"
        assert main(["eval", "--manifest", str(corpus_path), "--endpoint", f"mock:{script}",
                     "--mode", "role_based", "--reps", "3", "--out", str(preds)]) == 0
        rc = main(["metrics", "--records", str(preds), "--manifest", str(corpus_path),
                   "--model", model, "--config", "baseline",
                   "--ref", str(reference_table_path("table3"))])
        out = capsys.readouterr().out
        assert rc == 0, out
        assert "no differences" in out
    assert time.perf_counter() - started < 30.0


def test_parser_robustness(corpus42):
    """TEAL parse/print/parse fixpoint holds corpus-wide and errors carry their class"""
    for sample in corpus42.samples:
        if sample.platform != "algorand":
            continue
        program = parse_teal(sample.renderings["analysis_source"])
        reparsed = parse_teal(pretty_print(program))
        assert reparsed.instructions == program.instructions, sample.id
        assert reparsed.labels == program.labels, sample.id

    cases = {
        "int 1\nfancy_op\nreturn": UNKNOWN_OPCODE,
        "txn NotAField\nreturn": MALFORMED_IMMEDIATE,
        "x:\nint 1\nx:\nreturn": DUPLICATE_LABEL,
        "bnz nowhere\nreturn": UNDEFINED_BRANCH_TARGET,
    }
    for source, kind in cases.items():
        with pytest.raises(TealParseError) as err:
            parse_teal(source)
        assert err.value.kind == kind
