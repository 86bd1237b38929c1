"""Null acceptance and far rejection rates of every tester on the n = 12 corpora.

Used to pick the default constants in ``TesterConfig``.  Example:

    python3 scripts/calibrate.py --trials 100 --set c_loc=24 --tester loc-ind
"""

from __future__ import annotations

import argparse
import time
from dataclasses import replace

from isingtest.corpora import build_corpora
from isingtest.model import TesterConfig
from isingtest.sampling import ExactSource
from isingtest.testers import TESTER_NAMES, run_tester


def rates(corpus, config: TesterConfig, trials: int, **extra):
    out = {}
    for label, model in (("null", corpus.null), ("far", corpus.far)):
        source = ExactSource(model)
        rejects, samples = 0, 0
        t0 = time.perf_counter()
        for t in range(trials):
            v = run_tester(
                corpus.tester, source, replace(config, rng_seed=t), q=corpus.reference, **corpus.params, **extra
            )
            rejects += v.rejected
            samples += v.samples_used
        out[label] = (rejects / trials, samples / trials, time.perf_counter() - t0)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--tester", action="append", choices=TESTER_NAMES)
    ap.add_argument("--set", action="append", default=[], metavar="NAME=VALUE", help="override a constant")
    ap.add_argument("--no-prefilter", action="store_true")
    args = ap.parse_args()
    overrides = {k: float(v) for k, v in (s.split("=") for s in args.set)}
    corpora = build_corpora()
    for name in args.tester or TESTER_NAMES:
        c = corpora[name]
        config = TesterConfig(c.epsilon, **overrides)
        extra = {"prefilter": False} if args.no_prefilter and name.startswith("ltt") else {}
        r = rates(c, config, args.trials, **extra)
        print(
            f"{name:10s} eps={c.epsilon:.4f} null accept={1 - r['null'][0]:.2f} far reject={r['far'][0]:.2f} "
            f"samples={r['null'][1]:.0f} time={r['null'][2] + r['far'][2]:.1f}s"
        )


if __name__ == "__main__":
    main()
