"""
The `subpower` command: analyze, verify-term, smp, compact-rep and bench.

Exit codes: 0 for YES (or success), 1 for NO (or a failed verification),
2 for every error, including caps reached before an answer.
"""
import argparse
import json
import sys
import time
from typing import Any, List, Optional, Sequence
import numpy as np
from subpower import settings
from subpower.algebra import Catalog, load_catalog, subalgebra_closure
from subpower.circuits import configure_catalog, load_term, \
     parallelogram_counterexample, save_term
from subpower.congruence import build_analysis_report
from subpower.errors import CapExceededError, PreconditionError, SubpowerError
from subpower.io_util import catalog_path, read_json, write_csv, write_json
from subpower.logger import enableVerbose, getSubpowerConsoleLogger, getSubpowerLogger
from subpower.representations import compact_rep_direct, compact_rep_via_smp, \
     rep_to_dict, validate_standardized
from subpower.solvers import METHODS, SmpInstance, smp_brute, solve

__all__ = ["create_parser", "main", "load_configured_catalog", "make_instance",
           "BENCH_HEADER"]

logger = getSubpowerLogger(name='cli')
console = getSubpowerConsoleLogger(name='subpower')

BENCH_HEADER = ('n', 'method', 'verdict', 'micros', 'closure_size_or_dash')
FAMILIES = ('coset', 'random')


def load_configured_catalog(algebras : str, term : Optional[str]=None,
                            require_cube : bool=True) -> Catalog:
    """
    Loads an algebra file (or bundled catalog) and configures its cube term
    from `term` or from the file itself.

    Raises
    ------
    PreconditionError
        Raised if a cube term is required but none is available
    """
    cat = load_catalog(catalog_path(algebras))
    if term is not None:
        configure_catalog(cat, load_term(catalog_path(term)))
    elif 'cube_term' in cat.raw_terms:
        configure_catalog(cat)
    elif require_cube:
        raise PreconditionError('{} has no cube term; pass --term with a parallelogram term file'.\
                                format(algebras))
    return cat


def make_instance(cat : Catalog, family : str, n : int, k : int,
                  rng : np.random.Generator, name : Optional[str]=None) -> SmpInstance:
    """
    A benchmark instance over the n-th power of one catalog algebra with k
    random generators. The 'coset' target is the value of a random term in
    the generators (a YES instance); the 'random' target is uniform.
    """
    alg = cat[name or cat.base_names[0]]
    context = cat.context([alg.name] * n)
    gens = rng.integers(0, alg.size, size=(k, n))
    if family == 'random':
        return SmpInstance([alg.name] * n, gens, rng.integers(0, alg.size, size=n))
    pool = [g for g in gens]
    symbols = [(s, a) for s, a in cat.signature.symbols if a > 0]
    for _ in range(2 * k):
        symbol, arity = symbols[int(rng.integers(len(symbols)))]
        args = [pool[int(i)] for i in rng.integers(0, len(pool), size=arity)]
        pool.append(context.apply(symbol, args).astype(np.int64))
    return SmpInstance([alg.name] * n, gens, pool[-1])


def _load_instance(path : str) -> SmpInstance:
    return SmpInstance.from_dict(read_json(path))


def cmd_analyze(args : argparse.Namespace) -> int:
    cat = load_configured_catalog(args.algebras, args.term, require_cube=False)
    names = [args.algebra] if args.algebra else None
    report = build_analysis_report(cat, names, similarity=not args.skip_similarity)
    text = json.dumps(report, sort_keys=True, indent=1)
    if args.output:
        write_json(args.output, report)
    else:
        print(text)
    return 0


def cmd_verify_term(args : argparse.Namespace) -> int:
    cat = load_catalog(catalog_path(args.algebras))
    P = load_term(catalog_path(args.term))
    failure = parallelogram_counterexample(cat, P, args.rows_upper, args.rows_lower)
    if failure is None:
        console.info('pass: ({},{})-parallelogram identities hold in {}'.\
                     format(args.rows_upper, args.rows_lower, ', '.join(cat.names())))
        return 0
    name, row, values = failure
    console.info('fail: row {} fails in {} at x={}, y={}, z={}'.\
                 format(row + 1, name, values['x'], values['y'], values['z']))
    return 1


def cmd_smp(args : argparse.Namespace) -> int:
    cat = load_configured_catalog(args.algebras, args.term, require_cube=args.method != 'brute')
    instance = _load_instance(args.instance)
    answer = solve(instance, cat, args.method, witness=args.witness is not None)
    witness_file = None
    if args.witness is not None and answer.witness is not None:
        save_term(args.witness, answer.witness.circuit)
        witness_file = args.witness
    out = answer.to_dict(witness_file)
    if args.answer:
        write_json(args.answer, out)
    print(json.dumps(out, sort_keys=True))
    return 0 if answer.verdict else 1


def cmd_compact_rep(args : argparse.Namespace) -> int:
    cat = load_configured_catalog(args.algebras, args.term)
    instance = _load_instance(args.instance)
    context = instance.context(cat)
    if cat.d is not None and instance.n < cat.d:
        raise PreconditionError('compact representations need n >= d (n={}, d={})'.format(instance.n, cat.d))
    if args.method == 'direct':
        rep = compact_rep_direct(instance.generators, context)
    else:
        rep = compact_rep_via_smp(instance.generators, context)
    data = rep_to_dict(rep, instance.factors)
    if args.validate:
        B = subalgebra_closure(instance.generators, context).elements
        problems = validate_standardized(rep, B)
        for problem in problems:
            console.info('invalid: {}'.format(problem))
        if problems:
            return 1
    if args.output:
        write_json(args.output, data)
        console.info('wrote {} tuples, {} local and {} fork designations to {}'.\
                     format(len(data['tuples']), len(data['local']), len(data['forks']), args.output))
    else:
        print(json.dumps(data, sort_keys=True))
    return 0


def bench_rows(cat : Catalog, family : str, ns : Sequence[int], k : Optional[int], seed : int,
               methods : Sequence[str], brute_cap : Optional[int]=None,
               timing : bool=True) -> List[List[Any]]:
    """
    Times every method on one instance per n (same seed, same instances for
    every method). Brute force stopped by its cap reports verdict 'cap';
    rows with n < d are answered by closure and tagged 'brute'. With
    timing off the micros column is 0, so equal seeds give equal CSV.
    """
    rows : List[List[Any]] = []
    for n in ns:
        rng = np.random.default_rng([seed, n])
        instance = make_instance(cat, family, n, k or n, rng)
        for method in methods:
            start = time.perf_counter()
            size : Any = '-'
            try:
                if method == 'brute' or (cat.d is not None and n < cat.d):
                    answer = smp_brute(instance, cat) if brute_cap is None else \
                        _capped_brute(instance, cat, brute_cap)
                    size = answer.closure_size
                else:
                    answer = solve(instance, cat, method)
                verdict = answer.label
                method_tag = answer.method
            except CapExceededError:
                verdict, method_tag = 'cap', method
            micros = int((time.perf_counter() - start) * 1e6) if timing else 0
            rows.append([n, method_tag, verdict, micros, size])
            logger.debug('bench n={} {} {} {}us'.format(n, method_tag, verdict, micros))
    return rows


def _capped_brute(instance : SmpInstance, cat : Catalog, cap : int) -> Any:
    saved = settings.closureCap
    settings.closureCap = cap
    try:
        return smp_brute(instance, cat)
    finally:
        settings.closureCap = saved


def cmd_bench(args : argparse.Namespace) -> int:
    cat = load_configured_catalog(args.algebras, args.term)
    ns = list(range(args.n_min, args.n_max + 1, args.step))
    rows = bench_rows(cat, args.family, ns, args.k, args.seed, args.methods.split(','), args.brute_cap,
                      timing=not args.no_timing)
    text = write_csv(args.output, BENCH_HEADER, rows)
    if not args.output:
        sys.stdout.write(text)
    return 0


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='subpower',
                                     description='Subpower membership for finite algebras with a cube term')
    parser.add_argument('-v', '--verbose', default=False, action='store_true', help='Log at DEBUG level')
    parser.add_argument('--closure-cap', type=int, help='Elements one subalgebra closure may produce')
    parser.add_argument('--oracle-cap', type=int, help='Elements the fork-witness oracle may visit')
    parser.add_argument('--oracle-work-cap', type=int,
                        help='Argument tuples the fork-witness oracle walk may evaluate')
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p : argparse.ArgumentParser) -> None:
        p.add_argument('--algebras', required=True, help='Algebra file or bundled catalog name (z2, s3, ...)')
        p.add_argument('--term', help='Parallelogram term file (defaults to the cube_term of the algebra file)')

    p = sub.add_parser('analyze', help='Congruences, SI profiles, similarity and residual smallness')
    common(p)
    p.add_argument('--algebra', help='Report on this algebra only')
    p.add_argument('--skip-similarity', default=False, action='store_true', help='Omit the similarity matrix')
    p.add_argument('-o', '--output', help='Write the JSON report here instead of stdout')
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser('verify-term', help='Check the parallelogram identities of a term')
    p.add_argument('--algebras', required=True, help='Algebra file or bundled catalog name')
    p.add_argument('--term', required=True, help='Term file')
    p.add_argument('--role', default='parallelogram', choices=['parallelogram'], help='Identities to check')
    p.add_argument('--rows-upper', type=int, default=1, help='Number m of (x,x,y) rows')
    p.add_argument('--rows-lower', type=int, default=1, help='Number n of (y,x,x) rows')
    p.set_defaults(func=cmd_verify_term)

    p = sub.add_parser('smp', help='Decide membership of the target in the generated subalgebra')
    common(p)
    p.add_argument('--instance', required=True, help='Instance JSON file')
    p.add_argument('--method', default='auto', choices=list(METHODS), help='Solving method')
    p.add_argument('--witness', help='On YES, write a circuit computing the target here')
    p.add_argument('--answer', help='Also write the answer JSON here')
    p.set_defaults(func=cmd_smp)

    p = sub.add_parser('compact-rep', help='Compute a standardized representation')
    common(p)
    p.add_argument('--instance', required=True, help='Instance JSON file (the target is ignored)')
    p.add_argument('--method', default='direct', choices=['direct', 'via-smp'], help='Construction')
    p.add_argument('--validate', default=False, action='store_true',
                   help='Check the result against the brute-force subalgebra')
    p.add_argument('-o', '--output', help='Write the representation here instead of stdout')
    p.set_defaults(func=cmd_compact_rep)

    p = sub.add_parser('bench', help='Time methods on a family of instances (CSV)')
    p.add_argument('--algebras', default='z2', help='Algebra file or bundled catalog name')
    p.add_argument('--term', help='Parallelogram term file')
    p.add_argument('--family', default='coset', choices=list(FAMILIES), help='Instance family')
    p.add_argument('--n-min', type=int, default=4, help='Smallest arity')
    p.add_argument('--n-max', type=int, default=20, help='Largest arity')
    p.add_argument('--step', type=int, default=2, help='Arity step')
    p.add_argument('-k', type=int, help='Number of generators (defaults to n)')
    p.add_argument('--seed', type=int, default=1, help='Random seed')
    p.add_argument('--methods', default='compact,brute', help='Comma separated methods')
    p.add_argument('--brute-cap', type=int, default=2**20, help='Closure cap for the brute-force column')
    p.add_argument('--no-timing', default=False, action='store_true',
                   help='Write 0 in the micros column (reproducible output)')
    p.add_argument('-o', '--output', help='CSV file (stdout if omitted)')
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv : Optional[Sequence[str]]=None) -> int:
    parser = create_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        enableVerbose()
    if args.closure_cap is not None:
        settings.closureCap = args.closure_cap
    if args.oracle_cap is not None:
        settings.oracleCap = args.oracle_cap
    if args.oracle_work_cap is not None:
        settings.oracleWorkCap = args.oracle_work_cap
    try:
        return args.func(args)
    except CapExceededError as e:
        console.error('undecided at this scale ({} = {}): {}'.format(e.cap_name, e.limit, e))
        return 2
    except (SubpowerError, ValueError, OSError) as e:
        console.error('error: {}'.format(e))
        return 2


if __name__ == '__main__':
    sys.exit(main())
