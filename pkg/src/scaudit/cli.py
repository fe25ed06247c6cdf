"""Command-line entry point.

Subcommands: corpus-gen, scan, eval, metrics, export-ft, report. Exit codes:
0 on success, 1 when `scan --check` finds ground-truth violations or when
`metrics --ref` reports differences, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import harness, metrics, solana
from . import taxonomy
from . import teal
from . import finetune


def _cmd_corpus_gen(args) -> int:
    manifest = corpus_mod.generate(args.seed, args.per_class)
    corpus_mod.write_manifest(manifest, args.out)
    print(f"wrote {len(manifest.samples)} samples to {args.out}")
    return 0


def _scan_file(path: Path) -> list:
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".teal":
        return teal.analyze_source(text)
    if path.suffix == ".rs":
        return solana.analyze_source(text)
    raise SystemExit(f"cannot infer platform for {path} (expected .teal or .rs)")


def _print_findings(rows: list[tuple[str, object]], pretty: bool) -> None:
    if not pretty:
        for source, finding in rows:
            prefix = f"{source}:" if source else ""
            print(f"{prefix}{finding.record()}")
        return
    headers = ("source", "category", "lines", "message")
    table = [
        (source or "-", f.category, f"{f.line_span[0]}-{f.line_span[1]}", f.message)
        for source, f in rows
    ] or [("-", "-", "-", "no findings")]
    widths = [max(len(headers[i]), *(len(r[i]) for r in table)) for i in range(4)]
    print("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)))
    for row in table:
        print("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))


def _cmd_scan(args) -> int:
    if args.manifest:
        manifest = corpus_mod.load_manifest(args.manifest)
        if args.check:
            report = corpus_mod.validate(manifest)
            for line in report.lines():
                print(line)
            return 0 if report.ok else 1
        rows = [
            (sample.id, finding)
            for sample in manifest.samples
            for finding in _findings_for_sample(sample)
        ]
        _print_findings(rows, args.pretty)
        return 0
    rows = [(name, finding) for name in args.files for finding in _scan_file(Path(name))]
    _print_findings(rows, args.pretty)
    return 0


def _findings_for_sample(sample):
    source = sample.rendering(corpus_mod.manifest.ANALYSIS_SOURCE)
    if sample.platform == "algorand":
        return teal.analyze_source(source)
    return solana.analyze_source(source)


def _cmd_eval(args) -> int:
    manifest = corpus_mod.load_manifest(args.manifest)
    if args.category:
        manifest = manifest.subset(categories=args.category)
    endpoint = harness.ModelEndpoint(
        base_url=args.endpoint,
        model_name=args.model_name,
        temperature=args.temperature,
        max_new_tokens=args.max_tokens,
        timeout=args.timeout,
        auth_source=args.auth_env,
        retries=args.retries,
    )
    spec = harness.spec_for_mode(args.mode)
    records = harness.run_eval(
        endpoint, manifest, spec,
        repetitions=args.reps, seed=args.seed, concurrency=args.concurrency,
    )
    harness.write_records(records, args.out)
    errors = sum(1 for r in records if r.error)
    print(f"wrote {len(records)} records to {args.out}" + (f" ({errors} transport errors)" if errors else ""))
    return 0


def _rows_from_records(records, manifest, config: str, model: str) -> metrics.RowMap:
    matrices = harness.score(records, manifest)
    rows: metrics.RowMap = {}
    for category, cm in matrices.items():
        platform = taxonomy.get_category(category).platform.value
        rows[(platform, category, config, model)] = metrics.compute_metrics(cm)
    return rows


def _cmd_metrics(args) -> int:
    records = harness.load_records(args.records)
    manifest = corpus_mod.load_manifest(args.manifest)
    rows = _rows_from_records(records, manifest, args.config, args.model)
    table = metrics.emit_table(rows, args.format)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
        print(f"wrote table to {args.out}")
    else:
        print(table, end="")
    if args.ref:
        report = metrics.compare_with_reference(rows, args.ref)
        for line in report.lines():
            print(line)
        return 0 if report.ok else 1
    return 0


def _cmd_export_ft(args) -> int:
    manifest = corpus_mod.load_manifest(args.manifest)
    platform = None if args.platform == "joint" else args.platform
    train, evaluation = finetune.export_dataset(manifest, args.split, args.seed, platform=platform)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    finetune.write_pairs(train, out_dir / "train_pairs.jsonl")
    finetune.write_pairs(evaluation, out_dir / "eval_pairs.jsonl")
    finetune.write_config(args.model, {}, out_dir / f"{args.model}.ftconfig")
    print(f"wrote {len(train)} train / {len(evaluation)} eval pairs and config to {out_dir}")
    return 0


def _cmd_report(args) -> int:
    rows: metrics.RowMap = {}
    for path in args.rows:
        rows.update(metrics.rows_from_csv(path))
    grouped = metrics.group_by_owasp(rows)
    combos = sorted({combo for groups in grouped.values() for combo in groups})
    header = ["owasp", "name"] + [f"{config}/{model}" for config, model in combos]
    print(",".join(header))
    for owasp_id in sorted(grouped, key=lambda v: int(v[1:])):
        name = taxonomy.OWASP_TOP_10[owasp_id]
        cells = [owasp_id, name]
        for combo in combos:
            value = grouped[owasp_id].get(combo)
            cells.append("" if value is None else f"{metrics.round2(value):.2f}")
        print(",".join(cells))
    return 0


def _cmd_coverage(args) -> int:
    for owasp_id, platform, status, keys, note in taxonomy.coverage_rows(args.platform):
        keys_text = " ".join(keys)
        print(f"{owasp_id}|{platform}|{status}|{keys_text}|{note}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scaudit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus-gen", help="generate the labeled snippet corpus")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--per-class", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_corpus_gen)

    p = sub.add_parser("scan", help="run the static analyzers")
    p.add_argument("files", nargs="*", help=".teal or .rs files")
    p.add_argument("--manifest", help="scan all samples of a corpus manifest")
    p.add_argument("--check", action="store_true",
                   help="validate manifest ground truth; exit 1 on violations")
    p.add_argument("--pretty", action="store_true", help="aligned table instead of record lines")
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("eval", help="query a model endpoint over the corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--endpoint", required=True, help="HTTP URL or mock:<script-file>")
    p.add_argument("--mode", choices=[harness.BASELINE, harness.ROLE_BASED], default=harness.BASELINE)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--category", action="append", help="restrict to a category (repeatable)")
    p.add_argument("--concurrency", type=int, default=4)
    p.add_argument("--model-name", default="model")
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--max-tokens", type=int, default=512)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--auth-env", default="SCAUDIT_API_TOKEN")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("metrics", help="score a predictions file into tables")
    p.add_argument("--records", required=True, dest="records")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", default="model")
    p.add_argument("--config", default="baseline")
    p.add_argument("--format", choices=["csv", "markdown"], default="csv")
    p.add_argument("--ref", help="reference CSV; exit 1 when cells differ")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("export-ft", help="export instruction-tuning pairs and config")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--platform", choices=["joint", "algorand", "solana"], default="joint")
    p.add_argument("--model", default="deepseek")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_export_ft)

    p = sub.add_parser("report", help="group accuracy rows by OWASP entry")
    p.add_argument("--rows", action="append", required=True, help="metrics CSV (repeatable)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("coverage", help="print the OWASP platform mapping")
    p.add_argument("--platform", choices=["algorand", "solana"], default=None)
    p.set_defaults(func=_cmd_coverage)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        corpus_mod.ManifestFormatError,
        corpus_mod.SchemaVersionError,
        corpus_mod.TemplateError,
        teal.TealParseError,
        solana.SolanaScanError,
        harness.HarnessError,
        harness.RecordsFormatError,
        harness.MockScriptError,
        metrics.MetricsError,
        metrics.MalformedReferenceError,
        finetune.ExportError,
        finetune.PairsFormatError,
        taxonomy.TaxonomyError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
