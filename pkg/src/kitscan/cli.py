"""kitscan command line: scan, features, evaluate, authors, gen-corpus, verify."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import load_config
from .errors import KitscanError, MissingExclusion
from .evaluation import (
    CLASSIFIER_ORDER,
    Target,
    parse_technique,
    profile_report,
    profile_table,
    run_scenario1,
    run_scenario2,
    run_scenario3,
    write_report,
)
from .features import export_matrix, read_matrix
from .ingest import write_warnings
from .scan import KitScan, ScanFailure, scan_corpus, scan_path
from .synth.corpus import KITS_DIR, MANIFEST_NAME, CorpusSpec, generate_corpus, read_manifest, verify_against_manifest

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2
DEFAULT_SEED = 42

log = logging.getLogger("kitscan")


def _dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, ensure_ascii=False)


def _config(args):
    return load_config(
        args.config_dir,
        watchlist=args.watchlist,
        brands=args.brands,
        fingerprints=args.fingerprints,
        keywords=args.keywords,
        allowlist=args.allowlist,
        denylist=args.denylist,
    )


def _warn(kit_id: str, message: str) -> None:
    write_warnings(kit_id, [message], sys.stderr)


def _scan_outcomes(args):
    """Scan a single kit or every kit under a corpus directory."""
    config = _config(args)
    path = Path(args.path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file or directory")
    if args.corpus:
        return list(scan_corpus(path, config, jobs=args.jobs, on_warning=_warn))
    return [scan_path(path, config)]


def _open_out(target: Optional[str]):
    return open(target, "w", encoding="utf-8", newline="\n") if target else sys.stdout


def cmd_scan(args) -> int:
    outcomes = _scan_outcomes(args)
    failures = 0
    out = _open_out(args.out)
    try:
        for o in outcomes:
            if isinstance(o, ScanFailure):
                failures += 1
            elif o.warnings:
                write_warnings(o.kit_id, o.warnings, sys.stderr)
            out.write(_dumps(o.to_json()) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_PARTIAL if failures else EXIT_OK


def _scans_only(outcomes) -> tuple[list[KitScan], int]:
    scans = [o for o in outcomes if isinstance(o, KitScan)]
    for o in outcomes:
        if isinstance(o, ScanFailure):
            print(_dumps(o.to_json()), file=sys.stderr)
    return scans, len(outcomes) - len(scans)


def cmd_features(args) -> int:
    args.corpus = True
    scans, failures = _scans_only(_scan_outcomes(args))
    if not scans:
        print("kitscan: no kit could be scanned", file=sys.stderr)
        return EXIT_FATAL
    export_matrix([s.sample() for s in scans], args.out)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_evaluate(args) -> int:
    samples = read_matrix(args.matrix)
    if args.scenario == "s3":
        if not args.exclude:
            raise MissingExclusion("scenario s3 requires --exclude <technique>")
        result = run_scenario3(samples, parse_technique(args.exclude), args.seed, CLASSIFIER_ORDER,
                               retain_cooccurring=args.retain_cooccurring)
    else:
        run = run_scenario1 if args.scenario == "s1" else run_scenario2
        result = run(samples, Target(args.target), args.seed, CLASSIFIER_ORDER)
    out = Path(args.out)
    write_report(result, out, out.with_suffix(".txt"))
    sys.stdout.write(result.to_table())
    return EXIT_OK


def cmd_authors(args) -> int:
    args.corpus = True
    config = _config(args)
    scans, failures = _scans_only(_scan_outcomes(args))
    profiles = profile_report([s.signed() for s in scans], args.top, config.author_allowlist,
                              config.author_denylist)
    if args.format == "json":
        doc = {"schema_version": 1, "profiles": [p.to_json() for p in profiles]}
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "kit_count", "evasive_count", "obfuscated_count"])
        w.writerows([p.name, p.kit_count, p.evasive_count, p.obfuscated_count] for p in profiles)
        text = buf.getvalue()
    else:
        text = profile_table(profiles)
    out = _open_out(args.out)
    try:
        out.write(text)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_gen_corpus(args) -> int:
    data = json.loads(Path(args.spec).read_text("utf-8")) if args.spec else {}
    if args.kits is not None:
        data["kit_count"] = args.kits
    spec = CorpusSpec.from_json(data)
    records = generate_corpus(spec, args.seed, args.out)
    print(_dumps({"schema_version": 1, "seed": args.seed, "kits": len(records),
                  "manifest": str(Path(args.out) / MANIFEST_NAME)}))
    return EXIT_OK


def cmd_verify(args) -> int:
    root = Path(args.path)
    args.path, args.corpus = str(root / KITS_DIR), True
    scans, failures = _scans_only(_scan_outcomes(args))
    report = verify_against_manifest({s.kit_id: s.techniques for s in scans}, read_manifest(root / MANIFEST_NAME))
    print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    if failures:
        return EXIT_PARTIAL
    return EXIT_OK if report.perfect and report.near_miss_false_positives == 0 else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration")
    g.add_argument("--config-dir", type=Path, help="directory holding list/registry files (default: $KITSCAN_CONFIG_DIR)")
    g.add_argument("--watchlist", type=Path, help="blacklist watchlist tokens file")
    g.add_argument("--brands", type=Path, help="brand tokens file")
    g.add_argument("--fingerprints", type=Path, help="obfuscator fingerprint registry (JSON)")
    g.add_argument("--keywords", type=Path, help="author signature keywords file")
    g.add_argument("--allowlist", type=Path, help="author names always kept")
    g.add_argument("--denylist", type=Path, help="author names always dropped")

    p = argparse.ArgumentParser(prog="kitscan", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scan", parents=[common], help="scan a kit (or a corpus with --corpus) and print JSON lines")
    s.add_argument("path")
    s.add_argument("--corpus", action="store_true", help="treat PATH as a directory of kits")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("-o", "--out", help="write JSON lines here instead of stdout")
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("features", parents=[common], help="write the feature matrix CSV for a corpus")
    s.add_argument("path")
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("evaluate", help="run an evaluation scenario on a feature matrix")
    s.add_argument("matrix")
    s.add_argument("--scenario", choices=("s1", "s2", "s3"), required=True)
    s.add_argument("--target", choices=[t.value for t in Target], default=Target.EVASIVE.value)
    s.add_argument("--exclude", help="technique left out in s3 (e.g. eval, robots_txt)")
    s.add_argument("--retain-cooccurring", action="store_true",
                   help="s3: keep kits that combine the excluded technique with others in training")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("-o", "--out", required=True, help="JSON report path; the table goes next to it as .txt")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("authors", parents=[common], help="author signature profile table")
    s.add_argument("path")
    s.add_argument("--top", type=int, default=None)
    s.add_argument("--format", choices=("table", "json", "csv"), default="table")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_authors)

    s = sub.add_parser("gen-corpus", help="generate a synthetic corpus with a manifest")
    s.add_argument("out")
    s.add_argument("--spec", help="corpus spec JSON")
    s.add_argument("--kits", type=int, help="override kit_count")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.set_defaults(func=cmd_gen_corpus)

    s = sub.add_parser("verify", parents=[common], help="check detectors against a generated corpus manifest")
    s.add_argument("path", help="directory produced by gen-corpus")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (KitscanError, OSError, ValueError) as exc:
        print(f"kitscan: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
