from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from scaudit.metrics import (
    ConfusionMatrix,
    MalformedReferenceError,
    MetricsError,
    MetricsRow,
    compare_with_reference,
    compute_metrics,
    emit_table,
    group_by_owasp,
    platform_averages,
    reconstruct_cm,
    reference_rows,
    reference_table_path,
    round2,
)
from scaudit.taxonomy import TaxonomyError


def test_compute_metrics_reference_rows():
    assert compute_metrics(ConfusionMatrix(9, 0, 6, 15)).rounded() == (0.80, 1.00, 0.60, 0.75)
    assert compute_metrics(ConfusionMatrix(2, 0, 13, 15)).rounded() == (0.57, 1.00, 0.13, 0.24)
    assert compute_metrics(ConfusionMatrix(0, 0, 15, 15)).rounded() == (0.50, 0.00, 0.00, 0.00)


def test_empty_matrix_rejected():
    with pytest.raises(MetricsError):
        compute_metrics(ConfusionMatrix(0, 0, 0, 0))


def test_negative_counts_rejected():
    with pytest.raises(MetricsError):
        ConfusionMatrix(-1, 0, 0, 1)


def test_precision_zero_convention():
    row = compute_metrics(ConfusionMatrix(0, 0, 15, 15))
    assert row.precision == 0.0 and row.recall == 0.0 and row.f1 == 0.0


def test_reconstruct_contains_known_matrices():
    assert ConfusionMatrix(7, 2, 8, 13) in reconstruct_cm((0.67, 0.78, 0.47, 0.58), 15, 15)
    assert reconstruct_cm((1.00, 1.00, 1.00, 1.00), 15, 15) == [ConfusionMatrix(15, 0, 0, 15)]
    assert ConfusionMatrix(3, 0, 12, 15) in reconstruct_cm((0.60, 1.00, 0.20, 0.33), 15, 15)


def test_reconstruct_inconsistent_row_is_empty():
    assert reconstruct_cm((0.99, 0.01, 0.99, 0.01), 15, 15) == []


def test_reconstruct_requires_positive_counts():
    with pytest.raises(MetricsError):
        reconstruct_cm((1.0, 1.0, 1.0, 1.0), 0, 15)


@given(st.integers(0, 15), st.integers(0, 15))
def test_reconstruct_round_trips_compute(tp, fp):
    cm = ConfusionMatrix(tp=tp, fp=fp, fn=15 - tp, tn=15 - fp)
    row = compute_metrics(cm)
    matches = reconstruct_cm(row, 15, 15)
    assert cm in matches
    for m in matches:
        assert compute_metrics(m).same_at_2dp(row)


def test_every_reference_deepseek_row_reconstructs():
    rows = reference_rows("table3")
    deepseek = {k: v for k, v in rows.items() if k[3] == "deepseek"}
    assert len(deepseek) == 13
    for key, row in deepseek.items():
        matches = reconstruct_cm(row, 15, 15)
        assert matches, key
        for m in matches:
            got = compute_metrics(m).rounded()
            assert got == row.rounded(), key


def test_platform_averages_match_reference():
    averages = platform_averages(reference_rows("table3"))
    rounded = {k: round2(v) for k, v in averages.items()}
    assert rounded[("solana", "baseline", "deepseek")] == 0.63
    assert rounded[("solana", "baseline", "llama")] == 0.53
    assert rounded[("algorand", "baseline", "deepseek")] == 0.60
    assert rounded[("algorand", "baseline", "llama")] == 0.50


def test_emit_table_appends_average_rows():
    rows = {k: v for k, v in reference_rows("table3").items() if k[0] == "solana" and k[3] == "deepseek"}
    table = emit_table(rows, "csv")
    assert "solana,Avg.,baseline,deepseek,0.63,,," in table


def test_emit_table_empty_input_is_header_only():
    assert emit_table({}, "csv").splitlines() == [
        "platform,category,config,model,accuracy,precision,recall,f1"
    ]


def test_emit_table_stable_under_permutation():
    rows = reference_rows("table3")
    forward = emit_table(rows, "csv")
    backward = emit_table(dict(reversed(list(rows.items()))), "csv")
    assert forward == backward
    assert emit_table(rows, "markdown") == emit_table(dict(reversed(list(rows.items()))), "markdown")


def test_emit_table_markdown_layout():
    table = emit_table(reference_rows("table3"), "markdown")
    assert table.index("### Solana") < table.index("### Algorand")
    solana_block = table.split("### Algorand")[0]
    assert solana_block.index("| bump_seed |") < solana_block.index("| cpi_unchecked |")
    assert "| Avg. | 0.63 | 0.53" in solana_block


def test_group_by_owasp_v1_mean():
    keys = ("arbitrary_delete", "arbitrary_update", "unchecked_asset_receiver", "unchecked_payment_receiver")
    rows = {
        k: v for k, v in reference_rows("table4").items()
        if k[0] == "algorand" and k[2] == "ft" and k[3] == "deepseek" and k[1] in keys
    }
    grouped = group_by_owasp(rows)
    assert grouped["V1"][("ft", "deepseek")] == pytest.approx(0.6175)


def test_group_by_owasp_single_category_group():
    rows = {("solana", "type_confusion", "baseline", "deepseek"): MetricsRow(0.6, 1.0, 0.2, 1 / 3)}
    grouped = group_by_owasp(rows)
    assert grouped == {"V4": {("baseline", "deepseek"): 0.6}}


def test_group_by_owasp_unknown_category():
    rows = {("solana", "mystery", "baseline", "deepseek"): MetricsRow(0.5, 0, 0, 0)}
    with pytest.raises(TaxonomyError):
        group_by_owasp(rows)


def test_compare_identical_tables_is_empty_diff():
    rows = reference_rows("table3")
    report = compare_with_reference(rows, reference_table_path("table3"))
    assert report.ok
    assert report.compared_cells == 26 * 4


def test_compare_detects_single_perturbed_cell():
    rows = dict(reference_rows("table3"))
    key = ("solana", "bump_seed", "baseline", "deepseek")
    rows[key] = MetricsRow(rows[key].accuracy + 0.01, rows[key].precision, rows[key].recall, rows[key].f1)
    report = compare_with_reference(rows, reference_table_path("table3"))
    assert len(report.differences) == 1
    assert report.differences[0].key == key
    assert report.differences[0].metric == "accuracy"


def test_compare_ignores_rows_missing_from_run():
    ds_only = {k: v for k, v in reference_rows("table3").items() if k[3] == "deepseek"}
    report = compare_with_reference(ds_only, reference_table_path("table3"))
    assert report.ok
    assert len(report.missing_rows) == 13  # the llama rows


def test_malformed_reference_raises(tmp_path):
    bad = tmp_path / "ref.csv"
    bad.write_text("just,some,garbage\n1,2,3\n", encoding="utf-8")
    with pytest.raises(MalformedReferenceError):
        compare_with_reference({}, bad)


def test_round2_half_up():
    assert round2(0.575) == 0.58
    assert round2(0.596) == 0.60
    assert round2(2 / 15) == 0.13
    assert round2(0.125) == 0.13
