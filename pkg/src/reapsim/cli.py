"""Command-line entry point: ``reapsim {model,simulate,compare,mc-validate,gen-trace}``.

Exit codes: 0 success, 1 usage error, 2 input error, 3 validation failure.
"""

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cache import CacheGeometry, Scheme
from .config import ConfigError, RunConfig, load_config
from .disturbance import (
    DeviceParams,
    SignConvention,
    accumulated_error_probability,
    binomial_tail,
    block_error_probability,
    mttf_from_ledger,
    read_disturbance_probability,
    reap_error_probability,
)
from .estimator import ReliabilitySimulator
from .fault_injection import Depletion, McScenario, Protocol, run_trials
from .reporting import (
    SCHEMA_VERSION,
    area_report,
    build_histogram,
    emit,
    energy_report,
    format_float,
    mttf_report,
    render_json,
)
from .trace import OnesModel, SyntheticSpec, TraceError, generate_synthetic, stream_trace, write_trace

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_VALIDATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _count(text):
    # Accept 1e6-style counts.
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a count, got {text!r}") from None
    if value != int(value) or value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return int(value)


def _add_run_options(sub):
    sub.add_argument("trace", help="trace file in the text trace format")
    sub.add_argument("--config", help="TOML config, or a JSON report whose embedded config is reused")
    sub.add_argument("--out", required=True, help="output directory for report files")
    sub.add_argument("--sets", type=int, help="number of sets (power of two)")
    sub.add_argument("--ways", type=int, help="associativity")
    sub.add_argument("--block-bits", type=int, help="data bits per line")
    sub.add_argument("--ecc-t", type=int, help="correctable bits per block")
    sub.add_argument("--p", type=float, help="per-cell per-read flip probability (overrides the device model)")
    sub.add_argument("--ns-per-access", type=float, help="simulated time per access for MTTF")
    sub.add_argument("--mean-ones", type=int, help="ones count used for the histogram failure column")
    sub.add_argument("--default-ones", type=int, help="ones count for trace lines without a content descriptor")


def build_parser():
    parser = _Parser(prog="reapsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"reapsim {__version__}")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = subs.add_parser("model", help="evaluate one reliability formula")
    m.add_argument(
        "--formula",
        required=True,
        choices=["single", "accumulated", "reap", "eq1", "tail", "mttf"],
        help="single: one-read block error; accumulated: N unchecked reads then a check; "
        "reap: N checked reads; eq1: per-cell disturbance probability; tail: P(X >= k); "
        "mttf: sim time / expected failures",
    )
    m.add_argument("--p", type=float, default=1e-8, help="per-cell flip probability (default 1e-8)")
    m.add_argument("--n", type=int, default=100, help="ones in the block, or trials for 'tail' (default 100)")
    m.add_argument("--reads", type=int, default=1, help="reads between checks N (default 1)")
    m.add_argument("--ecc-t", type=int, default=1, help="correctable bits per block (default 1)")
    m.add_argument("--k-min", type=int, help="threshold for 'tail' (default ecc_t + 1)")
    m.add_argument("--t-read", type=float, default=1.0, help="read pulse width, ns (eq1)")
    m.add_argument("--tau", type=float, default=1.0, help="attempt period, ns (eq1)")
    m.add_argument("--delta", type=float, default=60.0, help="thermal stability factor (eq1)")
    m.add_argument("--i-ratio", type=float, help="I_read / I_C0 (eq1); overrides --i-read")
    m.add_argument("--i-read", type=float, default=50.0, help="read current, uA (eq1)")
    m.add_argument("--i-c0", type=float, default=100.0, help="critical current at 0 K, uA (eq1)")
    m.add_argument("--sign", choices=[s.value for s in SignConvention], default="standard",
                   help="exponent sign convention (eq1)")
    m.add_argument("--expected-failures", type=float, help="expected failures (mttf)")
    m.add_argument("--sim-time", type=float, help="simulated time, ns (mttf)")

    s = subs.add_parser("simulate", help="run one read path over a trace and write reports")
    _add_run_options(s)
    s.add_argument("--scheme", choices=[x.value for x in Scheme], help="read path (default from config)")

    c = subs.add_parser("compare", help="run conventional and REAP read paths on one trace")
    _add_run_options(c)

    v = subs.add_parser("mc-validate", help="check closed forms against Monte Carlo fault injection")
    v.add_argument("--p", type=_float_list, default=[1e-2, 1e-3], help="flip probabilities (default 1e-2,1e-3)")
    v.add_argument("--n", type=_int_list, default=[16, 100], help="ones counts (default 16,100)")
    v.add_argument("--reads", type=_int_list, default=[1, 10, 50], help="reads between checks (default 1,10,50)")
    v.add_argument("--ecc-t", type=int, default=1, help="correctable bits (default 1)")
    v.add_argument("--trials", type=_count, default=1_000_000, help="trials per cell (default 1e6)")
    v.add_argument("--seed", type=int, default=1, help="base seed (default 1)")
    v.add_argument("--depletion", choices=[d.value for d in Depletion], default="rebinomial",
                   help="disturbance depletion mode (default rebinomial)")
    v.add_argument("--protocol", choices=["conventional", "reap", "both"], default="both",
                   help="check protocol(s) to validate (default both)")
    v.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    v.add_argument("--out", help="directory for mc_validate.json and mc_validate.csv")

    g = subs.add_parser("gen-trace", help="write a seeded synthetic trace")
    g.add_argument("--out", help="output trace path (default stdout)")
    g.add_argument("--events", type=_count, default=100_000, help="number of accesses (default 1e5)")
    g.add_argument("--read-fraction", type=float, default=0.7, help="fraction of reads (default 0.7)")
    g.add_argument("--address-space", type=_count, default=65_536, help="distinct blocks (default 65536)")
    g.add_argument("--skew", type=float, default=1.1, help="Zipf exponent over blocks (default 1.1)")
    g.add_argument("--ones-model", default="fixed",
                   help="fixed[:COUNT] | uniform | from_seed (default fixed: block_bits/4)")
    g.add_argument("--seed", type=int, help="64-bit seed (default from config, else 42)")
    g.add_argument("--config", help="TOML config supplying geometry and seed")
    g.add_argument("--block-bits", type=int, help="data bits per line")
    return parser


def _resolve_config(args):
    config = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    config = config.override(
        "geometry",
        num_sets=getattr(args, "sets", None),
        ways=getattr(args, "ways", None),
        block_bits=getattr(args, "block_bits", None),
        ecc_t=getattr(args, "ecc_t", None),
    )
    if getattr(args, "p", None) is not None:
        config = config.override("device", p_override=args.p)
    config = config.override(
        "run",
        ns_per_access=getattr(args, "ns_per_access", None),
        mean_ones=getattr(args, "mean_ones", None),
        default_ones=getattr(args, "default_ones", None),
        seed=getattr(args, "seed", None) if args.command == "gen-trace" else None,
    )
    if getattr(args, "scheme", None):
        config = config.override("scheme", scheme=args.scheme)
    return config


def _meta(config, trace=None):
    meta = {"artifact": "reapsim", "artifact_version": __version__, "config": config.to_dict()}
    if trace is not None:
        meta["trace"] = trace
    return meta


def _write(path, report, fmt, meta=None):
    with open(path, "wb") as sink:
        emit(report, fmt, sink, meta)


def _estimator(config, scheme):
    return ReliabilitySimulator(
        num_sets=config.geometry.num_sets,
        ways=config.geometry.ways,
        block_bits=config.geometry.block_bits,
        ecc_t=config.geometry.ecc_t,
        scheme=scheme,
        device=config.device,
        writes_cause_concealed_reads=config.scheme.writes_cause_concealed_reads,
        account_dirty_writeback=config.scheme.account_dirty_writeback,
        drain_dirty_at_end=config.scheme.drain_dirty_at_end,
        ns_per_access=config.run.ns_per_access,
    )


def _run_trace(config, scheme, trace_path):
    path = Path(trace_path)
    try:
        with open(path, "rb") as source:
            events = stream_trace(source, config.geometry, config.run.default_ones)
            return _estimator(config, scheme).fit(events)
    except OSError as exc:
        raise InputError(f"cannot read trace {path}: {exc.strerror}") from None
    except TraceError as exc:
        raise InputError(f"{path}: {exc}") from None
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


class _LedgerReport:
    report_type = "ledger"
    csv_header = ("scheme", "expected_failures", "checked_reads", "concealed_increments",
                  "reads", "writes", "hits", "misses", "decodes", "writebacks")

    def __init__(self, fitted):
        self.ledger = fitted.ledger_
        self.counters = fitted.counters_

    def csv_rows(self):
        lg, c = self.ledger, self.counters
        yield (lg.scheme, lg.expected_failures, lg.checked_reads, lg.concealed_increments,
               c.reads, c.writes, c.hits, c.misses, c.decodes, c.writebacks)

    def to_dict(self):
        return {"ledger": self.ledger.to_dict(), "counters": self.counters.to_dict()}


def _sim_time(fitted):
    return fitted.sim_time_ns_ if fitted.sim_time_ns_ > 0 else fitted.ns_per_access


def cmd_model(args):
    f = args.formula
    inputs = {}
    try:
        if f == "eq1":
            i_read = args.i_ratio * args.i_c0 if args.i_ratio is not None else args.i_read
            params = DeviceParams(tau=args.tau, delta=args.delta, i_read=i_read, i_c0=args.i_c0,
                                  t_read=args.t_read, sign_convention=args.sign, p_override=None)
            inputs = params.to_dict()
            del inputs["p_override"]
            value = read_disturbance_probability(params)
        elif f == "mttf":
            if args.expected_failures is None or args.sim_time is None:
                raise UsageError("--formula mttf needs --expected-failures and --sim-time")
            inputs = {"expected_failures": args.expected_failures, "sim_time": args.sim_time}
            value = mttf_from_ledger(args.expected_failures, args.sim_time)
        elif f == "tail":
            k_min = args.k_min if args.k_min is not None else args.ecc_t + 1
            inputs = {"trials": args.n, "p": args.p, "k_min": k_min}
            value = binomial_tail(args.n, args.p, k_min)
        else:
            inputs = {"p": args.p, "n": args.n, "reads": args.reads, "ecc_t": args.ecc_t}
            if f == "single":
                if args.reads != 1:
                    raise UsageError("--formula single evaluates one read; use --reads 1 or 'accumulated'")
                value = block_error_probability(args.p, args.n, args.ecc_t)
            elif f == "accumulated":
                value = accumulated_error_probability(args.p, args.n, args.reads, args.ecc_t)
            else:
                value = reap_error_probability(args.p, args.n, args.reads, args.ecc_t)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    doc = {"schema_version": SCHEMA_VERSION, "artifact_version": __version__,
           "formula": f, "inputs": inputs, "value": value}
    sys.stdout.write(render_json(doc))
    return EXIT_OK


def cmd_simulate(args):
    config = _resolve_config(args)
    scheme = config.scheme.scheme.value
    fitted = _run_trace(config, scheme, args.trace)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(config, {"path": str(args.trace), "events": fitted.counters_.accesses})
    hist = build_histogram(fitted.ledger_, fitted.p_cell_, config.mean_ones, config.geometry.ecc_t)
    energy = energy_report({scheme: fitted.counters_}, config.energy, config.geometry)
    mttf = mttf_report([fitted.ledger_], _sim_time(fitted))
    _write(out / "ledger.json", _LedgerReport(fitted), "json", meta)
    _write(out / "histogram.json", hist, "json", meta)
    _write(out / "histogram.csv", hist, "csv")
    _write(out / "energy.json", energy, "json", meta)
    _write(out / "mttf.json", mttf, "json", meta)
    row = mttf.rows[0]
    sys.stdout.write(render_json({
        "scheme": scheme,
        "expected_failures": row.expected_failures,
        "mttf_ns": row.mttf_ns,
        "out": str(out),
    }))
    return EXIT_OK


class _ComparisonReport:
    report_type = "comparison"
    csv_header = ("scheme", "expected_failures", "checked_reads", "concealed_increments",
                  "decodes", "total_energy_pj", "mttf_ns")

    def __init__(self, fits, mttf, energy, area):
        self.fits, self.mttf, self.energy, self.area = fits, mttf, energy, area

    def csv_rows(self):
        for fitted, m, e in zip(self.fits, self.mttf.rows, self.energy.rows):
            lg = fitted.ledger_
            yield (lg.scheme, lg.expected_failures, lg.checked_reads, lg.concealed_increments,
                   fitted.counters_.decodes, e.total_energy, m.mttf_ns)

    def to_dict(self):
        return {
            "normalized_mttf": self.mttf.normalized_mttf,
            "energy_overhead_ratio": self.energy.overhead_ratio,
            "area_overhead_fraction": self.area.overhead_fraction,
            "schemes": [dict(zip(self.csv_header, row)) for row in self.csv_rows()],
            "ledgers": [f.ledger_.to_dict() for f in self.fits],
            "counters": [f.counters_.to_dict() for f in self.fits],
        }


def cmd_compare(args):
    config = _resolve_config(args)
    fits = [
        _run_trace(config, scheme, args.trace)
        for scheme in (Scheme.CONVENTIONAL.value, Scheme.REAP.value)
    ]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(config, {"path": str(args.trace), "events": fits[0].counters_.accesses})
    mttf = mttf_report([f.ledger_ for f in fits], _sim_time(fits[0]))
    energy = energy_report({f.scheme: f.counters_ for f in fits}, config.energy, config.geometry)
    area = area_report(config.geometry, config.area)
    comparison = _ComparisonReport(fits, mttf, energy, area)
    hist = build_histogram(fits[0].ledger_, fits[0].p_cell_, config.mean_ones, config.geometry.ecc_t)
    _write(out / "comparison.json", comparison, "json", meta)
    _write(out / "comparison.csv", comparison, "csv")
    _write(out / "histogram.json", hist, "json", meta)
    _write(out / "histogram.csv", hist, "csv")
    _write(out / "energy.json", energy, "json", meta)
    _write(out / "area.json", area, "json", meta)
    _write(out / "mttf.json", mttf, "json", meta)
    sys.stdout.write(render_json({
        "normalized_mttf": mttf.normalized_mttf,
        "energy_overhead_ratio": energy.overhead_ratio,
        "area_overhead_fraction": area.overhead_fraction,
        "out": str(out),
    }))
    return EXIT_OK


def _cell_seed(base_seed, index):
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1, np.uint64)[0])


class _ValidationReport:
    report_type = "mc_validate"
    csv_header = ("protocol", "depletion", "p", "n", "reads", "ecc_t", "trials", "seed",
                  "analytic", "empirical", "stderr", "z", "pass")

    def __init__(self, rows, trials, base_seed):
        self.rows, self.trials, self.base_seed = rows, trials, base_seed

    def csv_rows(self):
        return iter(self.rows)

    def to_dict(self):
        return {
            "base_seed": self.base_seed,
            "trials": self.trials,
            "all_pass": all(r[-1] for r in self.rows),
            "cells": [dict(zip(self.csv_header, r)) for r in self.rows],
        }


def z_score(empirical, analytic, trials):
    """Deviation in units of the binomial standard error at the analytic rate."""
    se = math.sqrt(analytic * (1.0 - analytic) / trials)
    diff = empirical - analytic
    if se == 0.0:
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    return diff / se


def validation_rows(ps, ns, reads_list, ecc_t, trials, seed, depletion, protocols, workers=1):
    rows = []
    index = 0
    for p in ps:
        for n in ns:
            for reads in reads_list:
                cell_seed = _cell_seed(seed, index)
                index += 1
                for protocol in protocols:
                    scenario = McScenario(p, n, reads, ecc_t, trials, cell_seed, depletion, protocol)
                    stats = run_trials(scenario, workers=workers)
                    if scenario.protocol is Protocol.CONVENTIONAL:
                        analytic = accumulated_error_probability(p, n, reads, ecc_t)
                    else:
                        analytic = reap_error_probability(p, n, reads, ecc_t)
                    z = z_score(stats.uncorrectable_rate, analytic, trials)
                    rows.append((protocol, scenario.depletion.value, p, n, reads, ecc_t, trials, cell_seed,
                                 analytic, stats.uncorrectable_rate, stats.stderr, z, abs(z) <= 3.0))
    return rows


def cmd_mc_validate(args):
    protocols = ["conventional", "reap"] if args.protocol == "both" else [args.protocol]
    try:
        rows = validation_rows(args.p, args.n, args.reads, args.ecc_t, max(args.trials, 1),
                               args.seed, args.depletion, protocols, args.workers)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    report = _ValidationReport(rows, max(args.trials, 1), args.seed)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "mc_validate.json", report, "json", {"artifact": "reapsim", "artifact_version": __version__})
        _write(out / "mc_validate.csv", report, "csv")
    header = f"{'protocol':<13}{'p':>10}{'n':>5}{'N':>5}{'analytic':>20}{'empirical':>20}{'stderr':>20}{'z':>9}"
    lines = [header]
    for r in rows:
        protocol, _, p, n, reads, _, _, _, analytic, empirical, stderr, z, ok = r
        lines.append(
            f"{protocol:<13}{p:>10.3g}{n:>5}{reads:>5}{format_float(analytic):>20}"
            f"{format_float(empirical):>20}{format_float(stderr):>20}{z:>9.3f}{'' if ok else '  FAIL'}"
        )
    failed = sum(1 for r in rows if not r[-1])
    lines.append(f"{len(rows) - failed}/{len(rows)} cells within 3 standard errors")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK if failed == 0 else EXIT_VALIDATION


def _ones_model(text, block_bits):
    name, _, count = text.partition(":")
    try:
        model = OnesModel(name)
    except ValueError:
        raise UsageError(f"unknown ones model {text!r}") from None
    if count and model is not OnesModel.FIXED:
        raise UsageError("only the fixed ones model takes a count")
    fixed = None
    if count:
        if not count.isdigit() or int(count) > block_bits:
            raise UsageError(f"fixed ones count must be in [0, {block_bits}], got {count!r}")
        fixed = int(count)
    return model, fixed


def cmd_gen_trace(args):
    config = _resolve_config(args)
    geometry = config.geometry
    model, fixed = _ones_model(args.ones_model, geometry.block_bits)
    try:
        spec = SyntheticSpec(args.events, args.read_fraction, args.address_space, args.skew,
                             model, fixed, config.run.seed)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    header = "reapsim gen-trace " + " ".join(
        f"{k}={v}" for k, v in spec.to_dict().items()
    ) + f" block_bits={geometry.block_bits}"
    events = generate_synthetic(spec, geometry)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as sink:
            write_trace(events, sink, header)
    else:
        write_trace(events, sys.stdout, header)
    return EXIT_OK


COMMANDS = {
    "model": cmd_model,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "mc-validate": cmd_mc_validate,
    "gen-trace": cmd_gen_trace,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help and --version exit 0; parse errors exit EXIT_USAGE.
        return exc.code
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"reapsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"reapsim {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"reapsim {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
