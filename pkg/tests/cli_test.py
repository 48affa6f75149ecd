import io, json, os, shutil
from contextlib import redirect_stdout
import numpy as np
from context import subpower as sp
from subpower.circuits import Circuit, load_term, save_term
from subpower.cli import BENCH_HEADER, bench_rows, create_parser, main, make_instance
from subpower.io_util import get_directory, write_json
from subpower.representations import load_rep
from base_test import SubpowerTest

ODD_GENERATORS = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]

class CliTest(SubpowerTest):

    @classmethod
    def setUpClass(cls):
        super(CliTest, cls).setUpClass()
        CliTest.cli_dir = '{}/cli_test'.format(os.getcwd())
        get_directory(CliTest.cli_dir)

    def path(self, name):
        return '{}/{}'.format(CliTest.cli_dir, name)

    def instance_file(self, name, factors, generators, target):
        path = self.path(name)
        write_json(path, {'factors': factors, 'generators': generators, 'target': target})
        return path

    def run_main(self, argv):
        out = io.StringIO()
        with redirect_stdout(out):
            code = main(argv)
        return code, out.getvalue()

    def testParser(self):
        args = create_parser().parse_args(['smp', '--algebras', 'z2', '--instance', 'i.json'])
        self.assertEqual('auto', args.method)
        self.assertIsNone(args.witness)
        args = create_parser().parse_args(['bench'])
        self.assertEqual(('z2', 4, 20, 2, 'compact,brute'),
                         (args.algebras, args.n_min, args.n_max, args.step, args.methods))
        with self.assertRaises(SystemExit):
            create_parser().parse_args(['smp', '--algebras', 'z2', '--instance', 'i.json',
                                        '--method', 'guess'])

    def testAnalyze(self):
        code, out = self.run_main(['analyze', '--algebras', 'z4'])
        self.assertEqual(0, code)
        report = json.loads(out)
        self.assertEqual(2, report['d'])
        self.assertEqual(3, report['algebras']['Z4']['congruence_count'])

        code, out = self.run_main(['analyze', '--algebras', 'semilattice2', '--skip-similarity',
                                   '-o', self.path('sl2.json')])
        self.assertEqual(0, code)
        self.assertEqual('', out)
        with open(self.path('sl2.json')) as f:
            self.assertIsNone(json.load(f)['d'])

    def testVerifyTerm(self):
        self.assertEqual(0, main(['verify-term', '--algebras', 'z2', '--term', 'maltsev_p']))
        self.assertEqual(0, main(['verify-term', '--algebras', 'lattice2', '--term', 'majority_p',
                                  '--rows-upper', '1', '--rows-lower', '2']))
        projection = self.path('projection.json')
        save_term(projection, Circuit(5, [], [0]))
        self.assertEqual(1, main(['verify-term', '--algebras', 'z2', '--term', projection]))
        self.assertEqual(2, main(['verify-term', '--algebras', 'z2', '--term', 'no_such_term']))

    def testSmp(self):
        yes = self.instance_file('yes.json', ['Z2'] * 3, ODD_GENERATORS, [1, 1, 1])
        witness = self.path('witness.json')
        code, out = self.run_main(['smp', '--algebras', 'z2', '--instance', yes,
                                   '--witness', witness, '--answer', self.path('answer.json')])
        self.assertEqual(0, code)
        answer = json.loads(out)
        self.assertEqual('YES', answer['verdict'])
        self.assertEqual('compact', answer['method'])
        self.assertEqual(witness, answer['witness_file'])
        context = self.catalog('z2').context(['Z2'] * 3)
        value = load_term(witness).evaluate(context, [np.asarray(g) for g in ODD_GENERATORS])
        self.assertEqual([1, 1, 1], np.asarray(value).tolist())
        with open(self.path('answer.json')) as f:
            self.assertEqual(answer, json.load(f))

        no = self.instance_file('no.json', ['Z2'] * 3, ODD_GENERATORS, [1, 1, 0])
        for method in ('auto', 'brute', 'reduction', 'rs'):
            code, out = self.run_main(['smp', '--algebras', 'z2', '--instance', no, '--method', method])
            self.assertEqual(1, code)
            self.assertEqual('NO', json.loads(out)['verdict'])

    def testSmpErrors(self):
        no = self.instance_file('no.json', ['Z2'] * 3, ODD_GENERATORS, [1, 1, 0])
        self.assertEqual(2, main(['smp', '--algebras', 'no_such_algebras.json', '--instance', no]))
        self.assertEqual(2, main(['smp', '--algebras', 'z2', '--instance', self.path('missing.json')]))
        self.assertEqual(2, main(['--closure-cap', '3', 'smp', '--algebras', 'z2', '--instance', no,
                                  '--method', 'brute']))
        q8 = self.instance_file('q8.json', ['Q8'] * 2, [[1, 2]], [1, 2])
        self.assertEqual(2, main(['smp', '--algebras', 'q8', '--instance', q8, '--method', 'rs']))
        bad = self.instance_file('bad.json', ['Z2'] * 3, ODD_GENERATORS, [2, 0, 0])
        self.assertEqual(2, main(['smp', '--algebras', 'z2', '--instance', bad]))

    def testCompactRep(self):
        odd = self.instance_file('odd.json', ['Z2'] * 3, ODD_GENERATORS, [1, 1, 1])
        for method in ('direct', 'via-smp'):
            output = self.path('rep-{}.json'.format(method))
            self.assertEqual(0, main(['compact-rep', '--algebras', 'z2', '--instance', odd,
                                      '--method', method, '--validate', '-o', output]))
            rep = load_rep(output, self.catalog('z2'))
            self.assertEqual(6, len(rep.local_index))
            self.assertIn((2, 1, 1), rep.fork_index)

        code, out = self.run_main(['compact-rep', '--algebras', 'z2', '--instance', odd])
        self.assertEqual(0, code)
        self.assertEqual(['Z2'] * 3, json.loads(out)['factors'])

        short = self.instance_file('short.json', ['L2'] * 2, [[0, 1]], [0, 1])
        self.assertEqual(2, main(['compact-rep', '--algebras', 'lattice2', '--instance', short]))

    def testMakeInstance(self):
        cat = self.catalog('z4')
        instance = make_instance(cat, 'coset', 5, 3, self.rng)
        self.assertEqual((3, 5), instance.generators.shape)
        self.assertTrue(sp.smp_brute(instance, cat).verdict)
        self.assertEqual(['Z4'] * 5, make_instance(cat, 'random', 5, 2, self.rng).factors)

    def testBenchRows(self):
        cat = self.catalog('z2')
        rows = bench_rows(cat, 'coset', [2, 3], None, 1, ['compact', 'brute'], timing=False)
        self.assertEqual(4, len(rows))
        self.assertEqual(['compact', 'brute', 'compact', 'brute'], [r[1] for r in rows])
        self.assertEqual({'YES'}, {r[2] for r in rows})
        self.assertEqual({0}, {r[3] for r in rows})
        self.assertEqual('-', rows[0][4])
        self.assertIsInstance(rows[1][4], int)

        lattice = bench_rows(self.catalog('lattice2'), 'coset', [2], None, 1, ['compact'], timing=False)
        self.assertEqual('brute', lattice[0][1])

        capped = bench_rows(cat, 'random', [12], 12, 1, ['brute'], brute_cap=12, timing=False)
        self.assertEqual([[12, 'brute', 'cap', 0, '-']], capped)

    def testBenchCsv(self):
        argv = ['bench', '--algebras', 'z2', '--n-min', '2', '--n-max', '4', '--step', '1',
                '--methods', 'compact,brute', '--no-timing']
        first, second = self.path('first.csv'), self.path('second.csv')
        self.assertEqual(0, main(argv + ['-o', first]))
        self.assertEqual(0, main(argv + ['-o', second]))
        with open(first) as f, open(second) as g:
            text = f.read()
            self.assertEqual(text, g.read())
        lines = text.strip().split('\n')
        self.assertEqual(','.join(BENCH_HEADER), lines[0])
        self.assertEqual(7, len(lines))

        code, out = self.run_main(argv)
        self.assertEqual(0, code)
        self.assertEqual(text, out)

    @classmethod
    def tearDownClass(cls):
        super(CliTest, cls).tearDownClass()
        shutil.rmtree(CliTest.cli_dir, ignore_errors=True)
