"""``mipr`` command line: each subcommand wraps one library call.

Exit codes: 0 success, 1 usage error, 2 data or file-format error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .data import Split, is_cifar10_dir, load_cifar10_binary, load_dataset_generic, make_synthetic, save_dataset_generic
from .errors import MiprError
from .formats import load_mi, load_model, load_trace, save_mi, save_model, save_trace
from .harness import (
    ExperimentSpec,
    ResultWriter,
    rank_similarity_report,
    run_experiment,
    summarize,
    write_rank_report,
    write_results,
    write_summary,
)
from .mi import HistogramConfig, all_layer_mi
from .network import TrainConfig, evaluate, train
from .probe import GRANULARITIES, ProbeConfig, record_trace
from .pruning import Method, mi_scores, prune, score_correlation, score_magnitude, score_random, score_weight_similarity, write_plan, write_scores

log = logging.getLogger("mipr")

DATA_ERRORS = (MiprError, OSError, ValueError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ------------------------------------------------------------ flag parsing


def _rate(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--rate: {text!r} is not a number") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"--rate must lie in [0, 1], got {value}")
    return value


def _rates(text):
    return [_rate(t) for t in text.split(",")]


def _positive(flag):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag}: {text!r} is not an integer") from None
        if value < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be >= 1, got {value}")
        return value

    return parse


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--seed: {text!r} is not an integer") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"--seed must be an unsigned 64-bit integer, got {value}")
    return value


def _seeds(text):
    return [_seed(t) for t in text.split(",")]


def _widths(text):
    try:
        widths = [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--arch: expected comma-separated widths, got {text!r}") from None
    if not widths or min(widths) < 1:
        raise argparse.ArgumentTypeError(f"--arch: widths must be positive, got {text!r}")
    return widths


def _arch_grid(text):
    """``1x64,2x128`` -> ``[(1, 64), (2, 128)]``."""
    out = []
    for item in text.split(","):
        try:
            hidden, width = (int(v) for v in item.lower().split("x"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"--arch: expected items like 2x64, got {item!r}") from None
        if hidden < 1 or width < 1:
            raise argparse.ArgumentTypeError(f"--arch: {item!r} needs positive depth and width")
        out.append((hidden, width))
    return out


def _method(text):
    try:
        return Method(text.replace("-", "_")).value
    except ValueError:
        choices = ", ".join(m.value for m in Method)
        raise argparse.ArgumentTypeError(f"--method must be one of {choices}, got {text!r}") from None


def _methods(text):
    return [_method(t) for t in text.split(",")]


def _positive_float(flag):
    def parse(text):
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag}: {text!r} is not a number") from None
        if value <= 0:
            raise argparse.ArgumentTypeError(f"{flag} must be positive, got {value}")
        return value

    return parse


def _gamma(text):
    value = _positive_float("--lr-gamma")(text)
    if value > 1:
        raise argparse.ArgumentTypeError(f"--lr-gamma must lie in (0, 1], got {value}")
    return value


def _nonneg_float(flag):
    def parse(text):
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag}: {text!r} is not a number") from None
        if value < 0:
            raise argparse.ArgumentTypeError(f"{flag} must be >= 0, got {value}")
        return value

    return parse


def _nonneg_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--epochs: {text!r} is not an integer") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"--epochs must be >= 0, got {value}")
    return value


def _bins(text):
    value = _positive("--bins")(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"--bins must be >= 2, got {value}")
    return value


def _samples(text):
    value = _positive("--samples")(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"--samples must be >= 2, got {value}")
    return value


def _paths(text):
    return [Path(t) for t in text.split(",") if t]


# ------------------------------------------------------------- arg groups

D = TrainConfig()
P = ProbeConfig()
H = HistogramConfig()


def _train_flags(p):
    p.add_argument("--epochs", type=_nonneg_int, default=D.epochs, help="training epochs (default: %(default)s)")
    p.add_argument("--lr", type=_positive_float("--lr"), default=D.initial_lr, help="initial learning rate (default: %(default)s)")
    p.add_argument("--lr-gamma", type=_gamma, default=D.lr_decay_gamma, help="per-epoch LR decay factor (default: %(default)s)")
    p.add_argument("--weight-decay", type=_nonneg_float("--weight-decay"), default=D.weight_decay, help="decoupled weight decay (default: %(default)s)")
    p.add_argument("--batch-size", type=_positive("--batch-size"), default=D.batch_size, help="minibatch size (default: %(default)s)")


def _probe_flags(p):
    p.add_argument("--samples", type=_samples, default=P.num_samples, help="probe samples S (default: %(default)s)")
    p.add_argument("--granularity", choices=GRANULARITIES, default=P.granularity, help="activation range granularity (default: %(default)s)")


def _bins_flag(p):
    p.add_argument("--bins", type=_bins, default=H.bins, help="histogram bins per axis B (default: %(default)s)")


def _jobs_flag(p):
    p.add_argument("--jobs", type=_positive("--jobs"), default=1, help="parallel workers (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mipr", description="Data-free MI-based structured pruning for fully-connected networks.")
    parser.add_argument("--version", action="version", version=f"mipr {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("train", help="train a classifier on an MIPD dataset")
    p.add_argument("--data", type=Path, required=True, help="training set (MIPD file)")
    p.add_argument("--arch", type=_widths, required=True, help="comma-separated hidden widths, e.g. 64,64")
    _train_flags(p)
    p.add_argument("--seed", type=_seed, default=D.seed, help="init/shuffle seed (default: %(default)s)")
    p.add_argument("--out", type=Path, required=True, help="output model file")

    p = sub.add_parser("eval", help="print the test error rate of a model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True, help="evaluation set (MIPD file)")

    p = sub.add_parser("probe", help="record the normalised activation trace under Gaussian input")
    p.add_argument("--model", type=Path, required=True)
    _probe_flags(p)
    p.add_argument("--seed", type=_seed, default=P.seed, help="probe seed (default: %(default)s)")
    p.add_argument("--out", type=Path, required=True, help="output trace file")

    p = sub.add_parser("mi", help="compute per-connection MI matrices from a trace")
    p.add_argument("--trace", type=Path, required=True)
    _bins_flag(p)
    _jobs_flag(p)
    p.add_argument("--out", type=Path, required=True, help="output MI cache file")

    for name, hlp in (("score", "dump per-neuron scores as CSV"), ("prune", "prune a model and write it with its plan")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--model", type=Path, required=True)
        p.add_argument("--method", type=_method, required=True, help="mi, magnitude, random, correlation or weight_similarity")
        p.add_argument("--rate", type=_rate, default=0.0 if name == "score" else None, required=name == "prune", help="maximum pruning rate in [0, 1]")
        p.add_argument("--trace", type=Path, help="trace file (recorded on the fly if absent)")
        p.add_argument("--mi-cache", type=Path, help="MI cache file (computed on the fly if absent)")
        p.add_argument("--seed", type=_seed, default=0, help="random-scorer and on-the-fly probe seed (default: %(default)s)")
        _probe_flags(p)
        _bins_flag(p)
        p.add_argument("--out", type=Path, required=True)
        if name == "prune":
            p.add_argument("--plan", type=Path, help="plan file (default: OUT with .plan suffix)")

    p = sub.add_parser("experiment", help="run the method x rate x seed grid")
    p.add_argument("--data", type=Path, help="CIFAR-10 binary dir, or dir with train.mipd and test.mipd")
    p.add_argument("--config", type=Path, help="JSON ExperimentSpec; overrides --arch/--method/--rate/--seed")
    p.add_argument("--arch", type=_arch_grid, default=[(1, 64)], help="architectures as DEPTHxWIDTH list (default: 1x64)")
    p.add_argument("--method", type=_methods, default=[m.value for m in Method], help="comma-separated methods (default: all)")
    p.add_argument("--rate", type=_rates, default=[0.1, 0.3, 0.5], help="comma-separated max rates (default: 0.1,0.3,0.5)")
    p.add_argument("--seed", type=_seeds, default=[0, 1, 2], help="comma-separated seeds (default: 0,1,2)")
    _train_flags(p)
    _probe_flags(p)
    _bins_flag(p)
    _jobs_flag(p)
    p.add_argument("--out", type=Path, required=True, help="results CSV; a _summary.csv is written next to it")

    p = sub.add_parser("rank-report", help="Spearman/Kendall similarity of MI and magnitude scores")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--trace", type=_paths, help="comma-separated trace files (one per probe seed)")
    p.add_argument("--mi-cache", type=_paths, help="comma-separated MI cache files (one per probe seed)")
    _bins_flag(p)
    p.add_argument("--out", type=Path, required=True, help="report CSV")

    p = sub.add_parser("synthetic", help="write a Gaussian-blob train/test pair as MIPD files")
    p.add_argument("--classes", type=_positive("--classes"), default=10)
    p.add_argument("--dim", type=_positive("--dim"), default=64)
    p.add_argument("--samples-per-class", type=_positive("--samples-per-class"), default=200)
    p.add_argument("--separation", type=_nonneg_float("--separation"), default=4.0)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    return parser


# -------------------------------------------------------------- commands


def _cmd_train(a):
    data = load_dataset_generic(a.data, Split.TRAIN)
    cfg = TrainConfig(a.epochs, a.lr, a.lr_gamma, a.weight_decay, a.batch_size, a.seed)
    net = train([data.dim] + a.arch + [data.num_classes], data, cfg)
    save_model(net, a.out)
    print(f"wrote {a.out}")


def _cmd_eval(a):
    net = load_model(a.model)
    print(repr(evaluate(net, load_dataset_generic(a.data, Split.TEST))))


def _cmd_probe(a):
    trace = record_trace(load_model(a.model), ProbeConfig(a.samples, a.seed, a.granularity))
    save_trace(trace, a.out)
    print(f"wrote {a.out}")


def _cmd_mi(a):
    trace = load_trace(a.trace)
    mats = all_layer_mi(trace, HistogramConfig(a.bins), workers=a.jobs)
    save_mi(mats, a.out, a.bins, trace.num_samples)
    print(f"wrote {a.out}")


def _caches(a, net):
    trace = load_trace(a.trace) if a.trace else None
    mi = load_mi(a.mi_cache)[0] if a.mi_cache else None
    needs_trace = a.method == Method.CORRELATION.value or (a.method == Method.MI.value and mi is None)
    if trace is None and needs_trace:
        trace = record_trace(net, ProbeConfig(a.samples, a.seed, a.granularity))
    return trace, mi


def _cmd_score(a):
    net = load_model(a.model)
    trace, mi = _caches(a, net)
    if a.method == Method.MI.value:
        if a.rate > 0:
            scores = prune(net, a.method, a.rate, trace=trace, mi=mi, seed=a.seed, hist_cfg=HistogramConfig(a.bins)).scores
        else:
            mi = mi if mi is not None else all_layer_mi(trace, HistogramConfig(a.bins))
            scores = [mi_scores(m) for m in mi[:-1]]
    elif a.method == Method.MAGNITUDE.value:
        scores = score_magnitude(net)
    elif a.method == Method.RANDOM.value:
        scores = score_random(net, a.seed)
    elif a.method == Method.CORRELATION.value:
        scores = score_correlation(trace)
    else:
        scores = score_weight_similarity(net)
    write_scores(a.out, a.method, scores)
    print(f"wrote {a.out}")


def _cmd_prune(a):
    net = load_model(a.model)
    trace, mi = _caches(a, net)
    result = prune(net, a.method, a.rate, trace=trace, mi=mi, seed=a.seed, hist_cfg=HistogramConfig(a.bins))
    save_model(result.network, a.out)
    plan_path = a.plan or a.out.with_suffix(".plan")
    write_plan(result.plan, plan_path)
    print(f"wrote {a.out} and {plan_path}")


def _load_pair(directory: Path):
    if is_cifar10_dir(directory):
        return load_cifar10_binary(directory)
    return (
        load_dataset_generic(directory / "train.mipd", Split.TRAIN),
        load_dataset_generic(directory / "test.mipd", Split.TEST),
    )


def _cmd_experiment(a):
    if a.config:
        spec = ExperimentSpec.from_json(a.config)
    else:
        spec = ExperimentSpec(a.arch, a.method, a.rate, a.seed)
    if a.data is None:
        raise UsageError("mipr experiment: error: --data is required")
    train_data, test_data = _load_pair(a.data)
    cfg = TrainConfig(a.epochs, a.lr, a.lr_gamma, a.weight_decay, a.batch_size, spec.seeds[0])
    partial = a.out.with_name(a.out.name + ".partial")
    with ResultWriter(partial) as sink:
        result = run_experiment(
            spec, train_data, test_data, cfg, ProbeConfig(a.samples, 0, a.granularity), HistogramConfig(a.bins), sink, a.jobs
        )
    write_results(a.out, result.records)
    partial.unlink()
    summary = a.out.with_name(a.out.stem + "_summary.csv")
    write_summary(summary, summarize(result.records))
    for failure in result.failures:
        log.warning("failed cell: %s", failure)
    print(f"wrote {a.out} ({len(result.records)} records, {len(result.failures)} failures) and {summary}")
    return 2 if result.failures else 0


def _cmd_rank_report(a):
    if not a.trace and not a.mi_cache:
        raise UsageError("mipr rank-report: error: one of --trace or --mi-cache is required")
    net = load_model(a.model)
    if a.mi_cache:
        rows = rank_similarity_report(net, mis=[load_mi(p)[0] for p in a.mi_cache])
    else:
        rows = rank_similarity_report(net, [load_trace(p) for p in a.trace], hist_cfg=HistogramConfig(a.bins))
    write_rank_report(a.out, rows)
    print(f"wrote {a.out}")


def _cmd_synthetic(a):
    a.out.mkdir(parents=True, exist_ok=True)
    train_data, test_data = make_synthetic(a.classes, a.dim, a.samples_per_class, a.separation, a.seed)
    save_dataset_generic(train_data, a.out / "train.mipd")
    save_dataset_generic(test_data, a.out / "test.mipd")
    print(f"wrote {a.out / 'train.mipd'} and {a.out / 'test.mipd'}")


COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "probe": _cmd_probe,
    "mi": _cmd_mi,
    "score": _cmd_score,
    "prune": _cmd_prune,
    "experiment": _cmd_experiment,
    "rank-report": _cmd_rank_report,
    "synthetic": _cmd_synthetic,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args) or 0
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"mipr {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
