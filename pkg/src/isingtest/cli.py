"""Command-line entry point: ``isingtest {sample,exact,test,make-instance,experiment}``.

Exit codes: 0 accept (or success), 1 reject, 2 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .hard_instances import make_product_perturbation, make_random_matching, make_two_node_pair
from .harness import ExperimentSpec, run_trials
from .io import parse_model, read_samples, serialize_model, write_instance, write_samples
from .model import ENUMERATION_CUTOFF, TesterConfig, exact_summary, skl_direct, tv_direct
from .sampling import BatchSource, ExactSource, GlauberConfig, GlauberSource, exact_draw, glauber_draw
from .testers import TESTER_NAMES, run_tester

EXIT_ACCEPT, EXIT_REJECT, EXIT_ERROR = 0, 1, 2

# defaults applied after the config file, so the precedence is flag > config > default
_DEFAULTS = {
    "seed": 0,
    "sampler": "auto",
    "fail_prob": 0.1,
    "field": False,
    "no_prefilter": False,
    "trials": None,
}
_CONSTANTS = ("c_loc", "c_f", "c_ch", "c_signal", "c_wl", "c_rep", "c_var")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file supplying any option below; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="isingtest", description="Sample, summarize and test Ising models.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", parents=[common], help="draw samples from a model to CSV")
    s.add_argument("--model")
    s.add_argument("--k", type=int)
    s.add_argument("--sampler", choices=["auto", "exact", "glauber"])
    s.add_argument("--allow-low-temperature", action="store_true", default=None)

    e = sub.add_parser("exact", parents=[common], help="exact log-partition and marginals by enumeration")
    e.add_argument("--model")
    e.add_argument("--reference", help="second model; adds SKL and TV distances")

    t = sub.add_parser("test", parents=[common], help="run one tester; exit 0 accept, 1 reject")
    t.add_argument("--tester", choices=TESTER_NAMES)
    t.add_argument("--model", help="model to sample from")
    t.add_argument("--samples", help="CSV of samples to test instead of sampling a model")
    t.add_argument("--reference", help="reference model q for identity testers")
    t.add_argument("--eps", type=float)
    t.add_argument("--beta", type=float)
    t.add_argument("--h", type=float)
    t.add_argument("--dmax", type=int)
    t.add_argument("--m-bound", type=int)
    t.add_argument("--field", action="store_true", default=None, help="external-field variant of ltt testers")
    t.add_argument("--no-prefilter", action="store_true", default=None)
    t.add_argument("--k", type=int, help="sample budget (same as --budget-override)")
    t.add_argument("--budget-override", type=int)
    t.add_argument("--sampler", choices=["auto", "exact", "glauber"])
    t.add_argument("--fail-prob", type=float)
    for c in _CONSTANTS:
        t.add_argument(f"--{c.replace('_', '-')}", dest=c, type=float)

    m = sub.add_parser("make-instance", parents=[common], help="generate a certified-far instance")
    m.add_argument(
        "--family",
        choices=["product-perturbation", "random-matching", "beta-independence", "beta-identity", "h-identity"],
    )
    m.add_argument("--n", type=int)
    m.add_argument("--eps", type=float)
    m.add_argument("--beta", type=float)
    m.add_argument("--h", type=float)

    x = sub.add_parser("experiment", parents=[common], help="run a power experiment from a JSON spec")
    x.add_argument("--trials", type=int)
    return p


def _options(args) -> dict:
    opts = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise ValueError("config file must hold a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in cfg.items()})
    explicit = {k: v for k, v in vars(args).items() if v is not None}
    opts.update(explicit)
    opts["explicit_flags"] = explicit
    for k, v in _DEFAULTS.items():
        opts.setdefault(k, v)
    return opts


def _need(opts, key):
    if opts.get(key) is None:
        raise ValueError(f"missing required option --{key.replace('_', '-')}")
    return opts[key]


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _pick_sampler(opts, n):
    sampler = opts.get("sampler", "auto")
    if sampler == "auto":
        sampler = "exact" if n <= ENUMERATION_CUTOFF else "glauber"
    return sampler


def cmd_sample(opts) -> int:
    model = parse_model(_need(opts, "model"))
    k = int(_need(opts, "k"))
    seed = int(opts["seed"])
    if _pick_sampler(opts, model.n) == "exact":
        batch = exact_draw(model, k, seed)
    else:
        batch = glauber_draw(model, k, GlauberConfig(), seed, bool(opts.get("allow_low_temperature")))
    out = _need(opts, "out")
    write_samples(batch, out)
    return EXIT_ACCEPT


def cmd_exact(opts) -> int:
    model = parse_model(_need(opts, "model"))
    s = exact_summary(model)
    result = {
        "n": model.n,
        "log_partition": s.log_partition,
        "node_marginals": s.node_marginals.tolist(),
        "edge_marginals": s.edge_marginals.tolist(),
    }
    if opts.get("reference"):
        q = parse_model(opts["reference"])
        result["skl"] = skl_direct(model, q)
        result["tv"] = tv_direct(model, q)
    _emit(json.dumps(result, indent=2) + "\n", opts.get("out"))
    return EXIT_ACCEPT


def cmd_test(opts) -> int:
    name = _need(opts, "tester")
    config = TesterConfig(
        float(_need(opts, "eps")),
        fail_prob=float(opts["fail_prob"]),
        rng_seed=int(opts["seed"]),
        **{c: float(opts[c]) for c in _CONSTANTS if opts.get(c) is not None},
    )
    budget = opts.get("budget_override") or opts.get("k")
    if opts.get("samples"):
        batch = read_samples(opts["samples"])
        source = BatchSource(batch.spins)
        budget = budget or batch.k
    else:
        model = parse_model(_need(opts, "model"))
        if _pick_sampler(opts, model.n) == "exact":
            source = ExactSource(model)
        else:
            source = GlauberSource(model, GlauberConfig())
    q = parse_model(opts["reference"]) if opts.get("reference") else None
    verdict = run_tester(
        name,
        source,
        config,
        q=q,
        beta=opts.get("beta"),
        h=opts.get("h"),
        d_max=opts.get("dmax"),
        m_bound=opts.get("m_bound"),
        field=bool(opts["field"]) if name.startswith("ltt") and opts.get("field") else None,
        prefilter=False if opts.get("no_prefilter") else None,
        k=budget,
    )
    _emit(verdict.to_json() + "\n", opts.get("out"))
    return EXIT_REJECT if verdict.rejected else EXIT_ACCEPT


def cmd_make_instance(opts) -> int:
    family = _need(opts, "family")
    eps = float(_need(opts, "eps"))
    seed = int(opts["seed"])
    out = _need(opts, "out")
    if family in ("product-perturbation", "random-matching"):
        n = int(_need(opts, "n"))
        make = make_product_perturbation if family == "product-perturbation" else make_random_matching
        inst = make(n, eps, seed)
        side = inst.sidecar()
        write_instance(inst.model, side, out)
    else:
        param = _need(opts, "h" if family == "h-identity" else "beta")
        p, q, skl = make_two_node_pair(family, float(param), eps)
        side = {"family": family, "parameter": float(param), "certified_skl": skl, "epsilon": eps}
        ref_path = Path(out).with_name(Path(out).stem + ".reference.json")
        serialize_model(q, ref_path)
        side["reference"] = ref_path.name
        write_instance(p, side, out)
    sys.stdout.write(json.dumps(side, sort_keys=True) + "\n")
    return EXIT_ACCEPT


def cmd_experiment(opts) -> int:
    if not opts.get("config"):
        raise ValueError("experiment needs --config SPEC.json")
    # the experiment comes from the file; only flags given on the command line override it
    data = json.loads(Path(opts["config"]).read_text())
    data = {k: v for k, v in data.items() if k != "out"}
    for key in ("seed", "trials"):
        if key in opts["explicit_flags"]:
            data[key] = int(opts["explicit_flags"][key])
    spec = ExperimentSpec.from_dict(data)
    out = _need(opts, "out")
    report = run_trials(spec, out)
    rates = {c.instance: [] for c in report.cells}
    for c in report.cells:
        rates[c.instance].append(c.reject_rate)
    sys.stdout.write(json.dumps({"out": str(out), "reject_rates": rates}, sort_keys=True) + "\n")
    return EXIT_ACCEPT


_COMMANDS = {
    "sample": cmd_sample,
    "exact": cmd_exact,
    "test": cmd_test,
    "make-instance": cmd_make_instance,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        opts = _options(args)
        return _COMMANDS[args.command](opts)
    except (ValueError, OSError, KeyError) as exc:
        sys.stderr.write(f"isingtest {args.command}: error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
