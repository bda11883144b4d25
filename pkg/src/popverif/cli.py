"""Command-line surface for batch verification.

One binary, several subcommands; exit codes: 0 holds/success, 1 property
violated, 2 usage or input error, 3 resource cap exceeded.  Randomness is
always seeded (fixed default) so logs are reproducible; report paths that
write delimited output also render a matplotlib figure next to it unless
--no-plot is given.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import rabin
from .errors import PopverifError, ResourceLimitError
from .hyper import (
    Verdict,
    check_protocol,
    check_protocol_ltl,
    theoretical_bounds,
)
from .ltl import parse_hyper, parse_ltl, to_text, wellspec_formula
from .model import Configuration, complete_totality, parse_protocol
from .product import (
    DEFAULT_NODE_CAP,
    ProdConfig,
    build_graph,
    full_slice_graph,
    make_product_system,
    to_dot,
)
from .flows import antichain_to_text, saturate
from .sim import estimate_probability, sample_run, trials_csv

EXIT_HOLDS = 0
EXIT_VIOLATED = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3


def _load_protocol(path: str):
    text = Path(path).read_text()
    # totality is completed as an explicit, documented pass on load
    return complete_totality(parse_protocol(text))


def _formula_text(args) -> str:
    if getattr(args, "formula_text", None):
        return args.formula_text
    if getattr(args, "formula", None):
        return Path(args.formula).read_text().strip()
    raise PopverifError("provide --formula FILE or --formula-text STRING")


def _parse_config(spec: str, protocol) -> Configuration:
    counts: dict[str, int] = {}
    for part in spec.replace(":", "=").split(","):
        part = part.strip()
        if not part:
            continue
        name, _, value = part.partition("=")
        counts[name.strip()] = int(value)
    return Configuration.from_dict(protocol, counts)


def _emit(args, payload: dict, text_lines) -> None:
    if args.output == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _verdict_exit(v: Verdict) -> int:
    return EXIT_HOLDS if v.holds else EXIT_VIOLATED


def _emit_verdict(args, protocol, v: Verdict) -> int:
    payload = v.to_json(protocol)
    lines = [f"answer: {v.answer} ({v.scope}, cutoff {v.cutoff})"]
    if v.witness is not None:
        lines.append(f"witness: {v.witness.pretty(protocol)}")
    for key, value in sorted(v.stats.items()):
        lines.append(f"{key}: {value}")
    _emit(args, payload, lines)
    return _verdict_exit(v)


def _save_plot(fig, path: Path) -> None:
    fig.savefig(path, bbox_inches="tight")


def _plot_trials(runs, png_path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    verdicts = ["winning-SCC", "losing-SCC", "undetermined"]
    counts = [sum(1 for r in runs if r.verdict == v) for v in verdicts]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.bar(verdicts, counts)
    ax1.set_ylabel("trials")
    ax1.set_title("verdicts")
    ax1.tick_params(axis="x", labelrotation=15)
    ax2.hist([len(r.steps) for r in runs], bins=20)
    ax2.set_xlabel("steps to verdict")
    ax2.set_ylabel("trials")
    ax2.set_title("run lengths")
    fig.tight_layout()
    _save_plot(fig, png_path)
    plt.close(fig)


def _plot_bounds(rows, png_path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [row["control_size"] for row in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, [row["log10_B"] for row in rows], marker="o", label="log10 B")
    ax.plot(xs, [row["log10_K"] for row in rows], marker="s", label="log10 K")
    ax.set_xlabel("control size")
    ax.set_ylabel("log10 of bound")
    ax.legend()
    fig.tight_layout()
    _save_plot(fig, png_path)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_check(args) -> int:
    protocol = _load_protocol(args.protocol)
    psi = parse_hyper(_formula_text(args), protocol)
    verdict = check_protocol(
        protocol,
        psi,
        mode=args.mode,
        cutoff=args.cutoff,
        semantics=args.semantics,
        max_nodes=args.max_nodes,
        max_dra_states=args.max_dra_states,
        jobs=args.jobs,
    )
    return _emit_verdict(args, protocol, verdict)


def _cmd_check_ltl(args) -> int:
    protocol = _load_protocol(args.protocol)
    phi = parse_ltl(_formula_text(args), protocol)
    verdict = check_protocol_ltl(
        protocol,
        phi,
        mode=args.mode,
        cutoff=args.cutoff,
        semantics=args.semantics,
        max_nodes=args.max_nodes,
        max_dra_states=args.max_dra_states,
        jobs=args.jobs,
    )
    return _emit_verdict(args, protocol, verdict)


def _cmd_wellspec(args) -> int:
    protocol = _load_protocol(args.protocol)
    psi = wellspec_formula(protocol)
    verdict = check_protocol(
        protocol,
        psi,
        mode="forall",
        cutoff=args.cutoff,
        semantics=args.semantics,
        max_nodes=args.max_nodes,
        max_dra_states=args.max_dra_states,
        jobs=args.jobs,
    )
    return _emit_verdict(args, protocol, verdict)


def _cmd_translate(args) -> int:
    alphabet = tuple(a.strip() for a in args.alphabet.split(",") if a.strip())
    phi = parse_ltl(_formula_text(args), alphabet)
    dra = rabin.ltl_to_dra(phi, alphabet, args.max_dra_states)
    hoa = rabin.serialize_dra(dra)
    if args.out:
        Path(args.out).write_text(hoa)
    else:
        sys.stdout.write(hoa)
    return EXIT_HOLDS


def _cmd_saturate(args) -> int:
    protocol = _load_protocol(args.protocol)
    phi = parse_ltl(_formula_text(args) if (args.formula or args.formula_text) else "true",
                    protocol)
    ps = make_product_system(protocol, phi, args.semantics)
    antichain, iterations = saturate(ps)
    stats = {
        "iterations": iterations,
        "size": len(antichain),
        "max_weight": max((tf.weight for tf in antichain), default=0),
        "weight_bound": 2 * iterations,
    }
    dump = antichain_to_text(antichain)
    if args.out:
        Path(args.out).write_text(dump)
    _emit(
        args,
        {"stats": stats, "antichain": dump.splitlines()},
        [f"{k}: {v}" for k, v in stats.items()] + ([] if args.out else dump.splitlines()),
    )
    return EXIT_HOLDS


def _cmd_simulate(args) -> int:
    protocol = _load_protocol(args.protocol)
    phi = parse_ltl(_formula_text(args), protocol)
    ps = make_product_system(protocol, phi, "plain")
    gamma0 = _parse_config(args.config, protocol)
    est = estimate_probability(
        gamma0, ps, trials=args.trials, seed=args.seed, max_steps=args.max_steps
    )
    if args.csv:
        from .product import build_graph as _bg

        graph = _bg(ps, [ProdConfig(gamma0, ps.dra.initial)])
        runs = [
            sample_run(gamma0, ps, args.max_steps, seed=f"{args.seed}:{i}", graph=graph)
            for i in range(args.trials)
        ]
        csv_path = Path(args.csv)
        csv_path.write_text(trials_csv(runs))
        if not args.no_plot:
            _plot_trials(runs, csv_path.with_suffix(".png"))
    payload = est.to_json()
    payload["config"] = args.config
    _emit(args, payload, [f"{k}: {v}" for k, v in payload.items()])
    return EXIT_HOLDS


def _cmd_bounds(args) -> int:
    protocol = _load_protocol(args.protocol)
    sizes = [int(s) for s in args.dra_sizes.split(",") if s.strip()]
    report = theoretical_bounds(protocol, sizes, k_prime=args.k_prime)
    lines = [f"log base inside exponents: {report['log_base']}", report["note"]]
    for row in report["rows"]:
        lines.append(
            "control size {control_size}: log10(B)={log10_B:.6g} "
            "log10(K)={log10_K:.6g}".format(**row)
        )
    if args.csv:
        csv_path = Path(args.csv)
        header = "protocol_states,control_size,k_prime,log10_B,log10_B_base_M,log10_K,log10_chain_bound"
        rows = [
            "{protocol_states},{control_size},{k_prime},{log10_B},{log10_B_base_M},"
            "{log10_K},{log10_chain_bound}".format(**row)
            for row in report["rows"]
        ]
        csv_path.write_text("\n".join([header] + rows) + "\n")
        if not args.no_plot:
            _plot_bounds(report["rows"], csv_path.with_suffix(".png"))
    _emit(args, report, lines)
    return EXIT_HOLDS


def _cmd_graph(args) -> int:
    protocol = _load_protocol(args.protocol)
    phi = parse_ltl(_formula_text(args) if (args.formula or args.formula_text) else "true",
                    protocol)
    ps = make_product_system(protocol, phi, args.semantics)
    if args.full_slice:
        graph = full_slice_graph(ps, args.size, args.max_nodes)
    else:
        if not args.config:
            raise PopverifError("provide --config or --full-slice with --size")
        gamma0 = _parse_config(args.config, protocol)
        graph = build_graph(ps, [ProdConfig(gamma0, ps.dra.initial)], args.max_nodes)
    dot = to_dot(graph, protocol, ps.dra.pairs)
    if args.out:
        Path(args.out).write_text(dot)
    else:
        sys.stdout.write(dot)
    return EXIT_HOLDS


# ---------------------------------------------------------------------------
# Argument plumbing


def _add_common(sp, formula=True, engine=True):
    sp.add_argument("--output", choices=("text", "json"), default="text")
    if formula:
        sp.add_argument("--formula", help="formula file")
        sp.add_argument("--formula-text", help="inline formula")
    if engine:
        sp.add_argument(
            "--semantics", choices=("auto", "plain", "accelerated"), default="auto"
        )
        sp.add_argument("--max-nodes", type=int, default=DEFAULT_NODE_CAP)
        sp.add_argument("--max-dra-states", type=int, default=rabin.DEFAULT_STATE_CAP)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="popverif",
        description="LTL and monadic HyperLTL verification of population protocols",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("check", help="decide a monadic hyper property up to a cutoff")
    sp.add_argument("--protocol", required=True)
    sp.add_argument("--cutoff", type=int, default=3)
    sp.add_argument("--mode", choices=("forall", "exists"), default="forall")
    sp.add_argument("--jobs", type=int, default=1)
    _add_common(sp)
    sp.set_defaults(func=_cmd_check)

    sp = sub.add_parser("check-ltl", help="decide an LTL property up to a cutoff")
    sp.add_argument("--protocol", required=True)
    sp.add_argument("--cutoff", type=int, default=3)
    sp.add_argument("--mode", choices=("forall", "exists"), default="forall")
    sp.add_argument("--jobs", type=int, default=1)
    _add_common(sp)
    sp.set_defaults(func=_cmd_check_ltl)

    sp = sub.add_parser("wellspec", help="check consensus well-specification")
    sp.add_argument("--protocol", required=True)
    sp.add_argument("--cutoff", type=int, default=3)
    sp.add_argument("--jobs", type=int, default=1)
    _add_common(sp, formula=False)
    sp.set_defaults(func=_cmd_wellspec)

    sp = sub.add_parser("translate", help="LTL to deterministic Rabin automaton (HOA)")
    sp.add_argument("--alphabet", required=True, help="comma-separated letters")
    sp.add_argument("--out", help="write HOA here instead of stdout")
    sp.add_argument("--max-dra-states", type=int, default=rabin.DEFAULT_STATE_CAP)
    sp.add_argument("--output", choices=("text", "json"), default="text")
    sp.add_argument("--formula", help="formula file")
    sp.add_argument("--formula-text", help="inline formula")
    sp.set_defaults(func=_cmd_translate)

    sp = sub.add_parser("saturate", help="transfer-flow antichain of a product system")
    sp.add_argument("--protocol", required=True)
    sp.add_argument("--out", help="write the antichain dump here")
    _add_common(sp)
    sp.set_defaults(func=_cmd_saturate)

    sp = sub.add_parser("simulate", help="stochastic scheduler probability estimate")
    sp.add_argument("--protocol", required=True)
    sp.add_argument("--config", required=True, help="initial configuration, e.g. A=1,B=2")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-steps", type=int, default=10_000)
    sp.add_argument("--csv", help="write a per-trial log (renders a figure alongside)")
    sp.add_argument("--no-plot", action="store_true")
    _add_common(sp)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("bounds", help="theoretical completeness-cutoff report")
    sp.add_argument("--protocol", required=True)
    sp.add_argument("--dra-sizes", default="1,2,4", help="comma-separated control sizes")
    sp.add_argument("--k-prime", type=int, default=1)
    sp.add_argument("--csv", help="write the rows as CSV (renders a figure alongside)")
    sp.add_argument("--no-plot", action="store_true")
    sp.add_argument("--output", choices=("text", "json"), default="text")
    sp.set_defaults(func=_cmd_bounds)

    sp = sub.add_parser("graph", help="DOT dump of a product configuration graph")
    sp.add_argument("--protocol", required=True)
    sp.add_argument("--config", help="root configuration, e.g. A=1,B=2")
    sp.add_argument("--full-slice", action="store_true")
    sp.add_argument("--size", type=int, default=2, help="population size for --full-slice")
    sp.add_argument("--out", help="write DOT here instead of stdout")
    _add_common(sp)
    sp.set_defaults(func=_cmd_graph)

    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_HOLDS
    try:
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (PopverifError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
