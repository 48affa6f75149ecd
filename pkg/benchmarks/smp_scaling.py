#!/usr/bin/env python3

import time, argparse
import numpy as np
import subpower as sp
from subpower import settings
from subpower.cli import load_configured_catalog, make_instance

FAMILIES = ('coset', 'random')

def time_compact(cat, family, n, k, trials, seed):
    print(">>> compact representation")
    rng = np.random.default_rng([seed, n])
    instance = make_instance(cat, family, n, k, rng)
    print("n = {}, k = {}, d = {}".format(n, k, cat.d))

    timings = []
    for i in range(trials):
        start = time.time()
        answer = sp.solve(instance, cat, 'compact')
        end = time.time()
        timings.append(end - start)
    tavg = sum(timings) / trials

    if family == 'coset':
        assert answer.verdict
    print("Verdict = {}".format(answer.label))
    print("Average time = {:.4f} sec".format(tavg))

def time_brute(cat, family, n, k, trials, seed, cap):
    print(">>> brute-force closure")
    rng = np.random.default_rng([seed, n])
    instance = make_instance(cat, family, n, k, rng)
    settings.closureCap = cap

    timings = []
    for i in range(trials):
        start = time.time()
        try:
            answer = sp.smp_brute(instance, cat)
        except sp.CapExceededError:
            print("Closure cap {:,} reached".format(cap))
            return
        end = time.time()
        timings.append(end - start)
    tavg = sum(timings) / trials

    print("Verdict = {}, closure size = {:,}".format(answer.label, answer.closure_size))
    print("Average time = {:.4f} sec".format(tavg))

def check_correctness(cat, family, seed):
    for n in range(max(cat.d, 2), 8):
        rng = np.random.default_rng([seed, n])
        instance = make_instance(cat, family, n, 3, rng)
        assert sp.solve(instance, cat, 'compact').verdict == sp.smp_brute(instance, cat).verdict

def create_parser():
    parser = argparse.ArgumentParser(description="Measure how SMP solvers scale with the number of factors.")
    parser.add_argument('-a', '--algebras', default='z2', help='Algebra file or bundled catalog name')
    parser.add_argument('-n', '--size', type=int, default=24, help='Problem size: number of factors')
    parser.add_argument('-k', '--generators', type=int, help='Number of generators (defaults to n)')
    parser.add_argument('-f', '--family', default='coset', help='Instance family ({})'.format(', '.join(FAMILIES)))
    parser.add_argument('-t', '--trials', type=int, default=3, help='Number of times to run the benchmark')
    parser.add_argument('-s', '--seed', type=int, default=1, help='Random seed')
    parser.add_argument('--brute', default=False, action='store_true', help='Also time the brute-force closure.')
    parser.add_argument('--brute-cap', type=int, default=2**20, help='Closure cap for the brute-force run')
    parser.add_argument('--correctness-only', default=False, action='store_true', help='Only check correctness, not performance.')
    return parser

if __name__ == "__main__":
    import sys
    parser = create_parser()
    args = parser.parse_args()
    if args.family not in FAMILIES:
        raise ValueError("Family must be {}, not {}".format('/'.join(FAMILIES), args.family))
    cat = load_configured_catalog(args.algebras)

    if args.correctness_only:
        for family in FAMILIES:
            check_correctness(cat, family, args.seed)
        sys.exit(0)

    k = args.generators or args.size
    print("number of factors = ", args.size)
    print("number of trials = ", args.trials)
    time_compact(cat, args.family, args.size, k, args.trials, args.seed)
    if args.brute:
        time_brute(cat, args.family, args.size, k, args.trials, args.seed, args.brute_cap)
    sys.exit(0)
