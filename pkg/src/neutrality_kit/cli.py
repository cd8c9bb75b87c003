"""Command-line front end: analyze a FASTA alignment, run simulation studies,
or print the bundled demo walkthrough.

Exit codes: 0 completed; 1 input error (unreadable file, bad flags, invalid
model spec, degenerate kernel); 2 test undefined (monomorphic data).
"""

import argparse
import json
import os
import sys

from .alignment import AlignmentError, read_fasta, site_classification_tsv
from .demo import demo_walkthrough
from .inference import AnalysisConfig, analyze, report_json, report_tsv
from .models import ModelSpecError, model_from_spec
from .simulator import (
    PitmanDrift,
    SimConfig,
    clt_study,
    power_study,
    rate_study_k,
    rate_study_n,
)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_TEST_UNDEFINED = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; 2 is reserved for
    # "test undefined" here, so remap flag problems to the input-error code.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


def _env_seed() -> int:
    raw = os.environ.get("NEUTRALITY_KIT_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(EXIT_INPUT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="neutrality-kit",
        description="Selective-neutrality testing and Monte Carlo studies for DNA alignments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="analyze a FASTA alignment", parents=[], add_help=True)
    pa.add_argument("input", help="FASTA file with at least two aligned sequences")
    pa.add_argument(
        "--t2-mode",
        choices=["per_site_per_pair", "per_pair", "per_segregating_site"],
        default="per_site_per_pair",
        help="headline diversity normalization (report always carries all three; "
        "the test itself always uses per_site_per_pair) [default: %(default)s]",
    )
    pa.add_argument(
        "--theta0-mode",
        default="pooled",
        help="pooled | sitewise | value=X (user-supplied null value) [default: %(default)s]",
    )
    pa.add_argument(
        "--variance",
        default="jackknife",
        help="jackknife | model=SPEC.json (model-implied exact variance) [default: %(default)s]",
    )
    pa.add_argument(
        "--k-mode",
        choices=["all", "segregating"],
        default="all",
        help="site set for the test statistic [default: %(default)s]",
    )
    pa.add_argument(
        "--sided",
        choices=["left", "right", "two"],
        default="two",
        help="tail(s) for the p-value [default: %(default)s]",
    )
    pa.add_argument("--alpha", type=float, default=0.05, help="test level [default: %(default)s]")
    pa.add_argument(
        "--bootstrap-B",
        type=int,
        default=0,
        dest="bootstrap_b",
        help="bootstrap replicates for Tajima's D p-value; 0 disables, minimum 100 "
        "[default: %(default)s]",
    )
    pa.add_argument(
        "--seed",
        type=int,
        default=None,
        help="RNG seed; falls back to NEUTRALITY_KIT_SEED, then 0",
    )
    pa.add_argument(
        "--threads", type=int, default=1,
        help="worker cap for replicate loops; never changes results [default: %(default)s]",
    )
    pa.add_argument(
        "--format", choices=["json", "tsv"], default="json",
        help="report rendering [default: %(default)s]",
    )
    pa.add_argument("--output", default=None, help="write the report here instead of stdout")
    pa.add_argument(
        "--sites-tsv", default=None,
        help="also export the per-site classification table to this path",
    )
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("simulate", help="run a Monte Carlo study from a config file")
    ps.add_argument("config", help="JSON study configuration")
    ps.add_argument("--seed", type=int, default=None, help="override the config seed")
    ps.add_argument("--threads", type=int, default=1, help="worker cap [default: %(default)s]")
    ps.add_argument(
        "--format", choices=["json", "tsv"], default="json",
        help="table rendering [default: %(default)s]",
    )
    ps.add_argument("--output", default=None, help="write the table here instead of stdout")
    ps.set_defaults(func=cmd_simulate)

    pd = sub.add_parser("demo", help="print the bundled worked example")
    pd.set_defaults(func=cmd_demo)
    return parser


def _emit(text: str, output):
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_analyze(args) -> int:
    try:
        aln = read_fasta(args.input)
    except OSError as exc:
        print(f"neutrality-kit: cannot read '{args.input}': {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except AlignmentError as exc:
        print(f"neutrality-kit: {args.input}: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    theta0_mode, theta0_value = args.theta0_mode, None
    if theta0_mode.startswith("value="):
        try:
            theta0_value = float(theta0_mode.split("=", 1)[1])
        except ValueError:
            print("neutrality-kit: bad --theta0-mode value", file=sys.stderr)
            return EXIT_INPUT_ERROR
        theta0_mode = "user"
    elif theta0_mode not in ("pooled", "sitewise"):
        print("neutrality-kit: --theta0-mode must be pooled, sitewise, or value=X", file=sys.stderr)
        return EXIT_INPUT_ERROR

    variance, model_spec = args.variance, None
    if variance.startswith("model="):
        path = variance.split("=", 1)[1]
        try:
            with open(path, "r", encoding="utf-8") as fh:
                model_spec = json.load(fh)
            model_from_spec(model_spec)  # validate early
        except (OSError, json.JSONDecodeError, ModelSpecError) as exc:
            print(f"neutrality-kit: bad variance model spec '{path}': {exc}", file=sys.stderr)
            return EXIT_INPUT_ERROR
        variance = "model"
    elif variance != "jackknife":
        print("neutrality-kit: --variance must be jackknife or model=SPEC", file=sys.stderr)
        return EXIT_INPUT_ERROR

    seed = args.seed if args.seed is not None else _env_seed()
    try:
        config = AnalysisConfig(
            t2_mode=args.t2_mode,
            theta0_mode=theta0_mode,
            theta0_value=theta0_value,
            variance=variance,
            model_spec=model_spec,
            k_mode=args.k_mode,
            sided=args.sided,
            alpha=args.alpha,
            bootstrap_b=args.bootstrap_b,
            seed=seed,
            threads=args.threads,
        )
    except ValueError as exc:
        print(f"neutrality-kit: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    report = analyze(aln, config)
    text = report_json(report) if args.format == "json" else report_tsv(report)
    _emit(text, args.output)
    if args.sites_tsv:
        with open(args.sites_tsv, "w", encoding="utf-8") as fh:
            fh.write(site_classification_tsv(aln))
    if report["sites"]["S"] == 0:
        return EXIT_TEST_UNDEFINED
    return EXIT_OK


def _rows_tsv(rows, columns) -> str:
    lines = ["\t".join(columns)]
    for row in rows:
        cells = []
        for col in columns:
            value = row.get(col)
            cells.append("NA" if value is None else repr(value) if isinstance(value, float) else str(value))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"neutrality-kit: cannot load config '{args.config}': {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        kind = spec.get("study")
        seed = args.seed if args.seed is not None else int(spec.get("seed", _env_seed()))
        replicates = int(spec.get("replicates", 2000))
        threads = args.threads
        if kind == "clt":
            config = SimConfig(
                model=model_from_spec(spec["model"]),
                n=int(spec["n"]),
                replicates=replicates,
                seed=seed,
                statistic=spec.get("statistic", "standardized_t2"),
                theta0=spec.get("theta0"),
                threads=threads,
            )
            result = clt_study(config)
            payload = result.summary_dict()
            rows = [payload]
            columns = list(payload.keys())
        elif kind == "rate":
            axis = spec.get("axis", "n")
            if axis == "n":
                result = rate_study_n(
                    model_from_spec(spec["model"]),
                    spec["grid"],
                    replicates,
                    seed,
                    constant=float(spec.get("constant", 1.0)),
                    threads=threads,
                )
                columns = ["n", "K", "ks", "bound", "loglog_slope"]
            else:
                base = dict(spec["model"])
                models = {}
                for k in spec["grid"]:
                    per_k = dict(base)
                    per_k["K"] = int(k)
                    models[int(k)] = model_from_spec(per_k)
                result = rate_study_k(
                    models,
                    int(spec["n"]),
                    replicates,
                    seed,
                    mixing=spec.get("mixing"),
                    threads=threads,
                )
                columns = ["n", "K", "ks", "rate", "mixing", "rate_formula", "loglog_slope"]
            payload = result.summary_dict()
            rows = [dict(r, loglog_slope=result.loglog_slope) for r in result.rows]
        elif kind == "power":
            drift = None
            if spec.get("drift"):
                drift = PitmanDrift(
                    c=float(spec["drift"]["c"]),
                    exponent=float(spec["drift"].get("exponent", 0.5)),
                )
            alt = spec.get("alt_model")
            result = power_study(
                null_model=model_from_spec(spec["null_model"]),
                alt_model=model_from_spec(alt) if alt else None,
                n_grid=spec["n_grid"],
                alpha=float(spec.get("alpha", 0.05)),
                replicates=replicates,
                seed=seed,
                sided=spec.get("sided", "right"),
                variance=spec.get("variance", "jackknife"),
                drift=drift,
                threads=threads,
            )
            payload = result.summary_dict()
            rows = [
                dict(r, alpha=result.alpha, sided=result.sided) for r in result.rows
            ]
            columns = ["n", "K", "rejection_rate", "theta0", "target_gap", "alpha", "sided"]
        else:
            print("neutrality-kit: config 'study' must be clt, rate, or power", file=sys.stderr)
            return EXIT_INPUT_ERROR
    except (KeyError, TypeError) as exc:
        print(f"neutrality-kit: malformed study config: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (ModelSpecError, ValueError) as exc:
        print(f"neutrality-kit: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    if args.format == "json":
        text = json.dumps(payload, indent=2, allow_nan=False) + "\n"
    else:
        text = _rows_tsv(rows, columns)
    _emit(text, args.output)
    return EXIT_OK


def cmd_demo(args) -> int:
    sys.stdout.write(demo_walkthrough())
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
