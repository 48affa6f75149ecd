import os, shutil
from math import comb
import numpy as np
from context import subpower as sp
from subpower.algebra import subalgebra_closure
from subpower.circuits import Circuit, CircuitBuilder, build_Tn, build_Tn_plus, \
     build_tn, check_symbols, circuit_from_dict, closure_circuit, configure_catalog, \
     configure_cube_term, expand_to_signature, load_term, parallelogram_counterexample, \
     parallelogram_rows, save_term, search_parallelogram_term, search_term, tn_inputs, \
     verify_parallelogram
from subpower.errors import CatalogError, IdentityError, PreconditionError
from subpower.io_util import catalog_path, get_directory
from base_test import SubpowerTest

def raw_catalog(name):
    return sp.load_catalog(catalog_path(name))

class CircuitsTest(SubpowerTest):

    @classmethod
    def setUpClass(cls):
        super(CircuitsTest, cls).setUpClass()
        CircuitsTest.test_dir = '{}/circuits_test/'.format(os.getcwd())
        get_directory(CircuitsTest.test_dir)

    def testCircuitValidation(self):
        with self.assertRaises(CatalogError):
            Circuit(2, [('m', (0, 1, 2))], [2])
        with self.assertRaises(CatalogError):
            Circuit(2, [], [2])
        with self.assertRaises(CatalogError):
            circuit_from_dict({'gates': []})

    def testBuilderHashConsing(self):
        builder = CircuitBuilder(3)
        first = builder.apply('m', 0, 1, 2)
        self.assertEqual(first, builder.apply('m', 0, 1, 2))
        unused = builder.apply('m', 2, 1, 0)
        top = builder.apply('m', first, first, 0)
        self.assertEqual(3, len(builder))
        circuit = builder.build([top])
        self.assertEqual(2, circuit.gate_count())
        self.assertNotIn(('m', (2, 1, 0)), circuit.gates)
        self.assertEqual(3, len(builder.build([top, unused])))
        self.assertEqual(2, circuit.depth())

    def testTermFiles(self):
        P = load_term(catalog_path('maltsev_p'))
        self.assertEqual(5, P.input_count)
        self.assertEqual([('m', (0, 1, 2))], list(P.gates))
        path = '{}/term.json'.format(CircuitsTest.test_dir)
        save_term(path, P)
        self.assertEqual(P, load_term(path))
        self.assertEqual('m(x,y,z)', P.to_term_string(['x', 'y', 'z', 'w1', 'w2']))

    def testParallelogramRows(self):
        self.assertEqual([['x','x','y','z','y','y'],
                          ['y','x','x','y','z','y'],
                          ['y','x','x','y','y','z']], parallelogram_rows(1, 2))

    def testVerifyParallelogram(self):
        z2 = raw_catalog('z2')
        self.assertTrue(verify_parallelogram(z2, load_term(catalog_path('maltsev_p')), 1, 1))
        lattice = raw_catalog('lattice2')
        self.assertTrue(verify_parallelogram(lattice, load_term(catalog_path('majority_p')), 1, 2))

        projection = Circuit(5, [], [0])
        self.assertFalse(verify_parallelogram(z2, projection, 1, 1))
        self.assertEqual(('Z2', 0, {'x': 0, 'y': 1, 'z': 0}),
                         parallelogram_counterexample(z2, projection, 1, 1))
        with self.assertRaises(PreconditionError):
            verify_parallelogram(z2, projection, 1, 2)
        with self.assertRaises(PreconditionError):
            verify_parallelogram(z2, projection, 0, 2)

    def testConfigureCubeTerm(self):
        cat = configure_catalog(raw_catalog('z2'))
        self.assertEqual(2, cat.d)
        self.assertEqual(1, cat.e)
        self.assertIsNotNone(cat.difference_term)
        for symbol in ('P', 's', 'p', 'xy'):
            self.assertIn('Z2', cat.derived_tables[symbol])
        # p(x,u,y) = m(x,u,y) for the Mal'tsev-based term
        z2 = cat['Z2']
        p = cat.derived_tables['p']['Z2']
        for x in range(2):
            for u in range(2):
                for y in range(2):
                    self.assertEqual(int(z2.apply('m', x, u, y)), int(p[x, u, y]))
        self.assertEqual(cat.d + 3, cat.circuits['P'].input_count)

        lattice = configure_catalog(raw_catalog('lattice2'))
        self.assertEqual(3, lattice.d)
        self.assertEqual(1, lattice.e)

        with self.assertRaises(IdentityError):
            configure_cube_term(raw_catalog('z2'), Circuit(5, [], [0]))
        with self.assertRaises(PreconditionError):
            configure_catalog(raw_catalog('semilattice2'))
        with self.assertRaises(CatalogError):
            configure_cube_term(raw_catalog('z2'), Circuit(5, [('meet', (0, 1))], [5]))

    def testCheckSymbols(self):
        symbols = {'m': 3}
        check_symbols(Circuit(3, [('m', (0, 1, 2))], [3]), symbols)
        with self.assertRaises(CatalogError):
            check_symbols(Circuit(3, [('m', (0, 1))], [3]), symbols)
        with self.assertRaises(CatalogError):
            check_symbols(Circuit(2, [('f', (0, 1))], [2]), symbols)

    def testExpandToSignature(self):
        P = load_term(catalog_path('maltsev_p'))
        builder = CircuitBuilder(3)
        out = builder.apply('P', 0, 1, 2, 0, 2)
        expanded = expand_to_signature(builder.build([out]), {'P': P})
        self.assertEqual([('m', (0, 1, 2))], list(expanded.gates))

    def testTnShape(self):
        self.assertEqual([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], tn_inputs(4, 3))
        for n, d, e in [(2, 2, 1), (5, 2, 1), (6, 3, 1), (6, 3, 2), (7, 4, 1)]:
            tn = build_tn(n, d, e)
            self.assertEqual(3 + comb(n, d - 1), tn.input_count)
            self.assertLessEqual(tn.gate_count('P'), (e + 3) * comb(n, d))
            self.assertEqual(tn.gate_count(), tn.gate_count('P'))
        with self.assertRaises(PreconditionError):
            build_tn(2, 3)
        with self.assertRaises(PreconditionError):
            build_tn(4, 1)

    def testGateCountLaw(self):
        for d in (2, 3):
            for e in (1, 2):
                for n in range(d, 21):
                    self.assertLessEqual(build_tn(n, d, e).gate_count(), (e + 3) * comb(n, d),
                                         'n={} d={} e={}'.format(n, d, e))
                # small n is dominated by lower order terms, so the fit starts at n = 10
                ns = np.arange(10, 21)
                counts = [build_Tn(int(n), d, e).gate_count() for n in ns]
                self.assertEqual(sorted(counts), counts)
                slope = np.polyfit(np.log(ns), np.log(counts), 1)[0]
                self.assertLessEqual(slope, d + 1.2, 'd={} e={}'.format(d, e))

    def testLayers(self):
        tn = build_tn(6, 3, 2)
        layers = tn.layers()
        ids = np.concatenate([group for _, group, _ in layers])
        self.assertEqual(list(range(tn.input_count, tn.input_count + tn.gate_count())), sorted(ids.tolist()))
        seen = set(range(tn.input_count))
        for symbol, group, operands in layers:
            self.assertEqual('P', symbol)
            self.assertEqual((len(group), 6), operands.shape)
            self.assertTrue(set(operands.ravel().tolist()) <= seen)
            seen.update(group.tolist())
        self.assertIs(layers, tn.layers())

        constants = Circuit(1, [('c', ()), ('f', (0, 1))], [2]).layers()
        self.assertEqual([('c', [1], (1, 0)), ('f', [2], (1, 2))],
                         [(s, g.tolist(), o.shape) for s, g, o in constants])

    def testTnOnMaltsevProducts(self):
        # P gates evaluated through the compiled table agree with their expansion
        cat = self.catalog('z2')
        context = cat.context(['Z2'] * 4)
        tn = build_tn(4, 2, 1)
        P = cat.circuits['P']
        expanded = expand_to_signature(tn, {'P': P})
        args = [self.rng.integers(0, 2, size=4) for _ in range(tn.input_count)]
        self.assertEqual(tn.evaluate(context, args).tolist(),
                         expanded.evaluate(context, args).tolist())

    def testBigTn(self):
        self.assertEqual(1, build_Tn(1, 2).input_count)
        self.assertEqual(0, build_Tn(1, 2).gate_count())
        Tn = build_Tn(5, 2, 1)
        self.assertEqual(2 * 4 + 5, Tn.input_count)
        plus = build_Tn_plus(5, 2, 1)
        self.assertEqual(Tn.input_count + 1, plus.input_count)
        self.assertEqual(1 + 4, len(plus.outputs))
        with self.assertRaises(PreconditionError):
            build_Tn(0, 2)

    def testClosureCircuit(self):
        cat = raw_catalog('z2')
        context = cat.context(['Z2'] * 3)
        gens = [[1,0,0],[0,1,0],[0,0,1]]
        closure = subalgebra_closure(gens, context, target=[1,1,1])
        builder = CircuitBuilder(3)
        out = closure_circuit(closure, closure.found, 3, builder)
        witness = builder.build([out])
        self.assertEqual([1,1,1], witness.evaluate(context, gens).tolist())

        found = search_term(context, np.asarray(gens), np.asarray([1,1,1]))
        self.assertEqual([1,1,1], found.evaluate(context, gens).tolist())
        self.assertIsNone(search_term(context, np.asarray(gens), np.asarray([1,1,0])))

    def testSearchParallelogramTerm(self):
        z2 = raw_catalog('z2')
        P = search_parallelogram_term(z2['Z2'], 2)
        self.assertIsNotNone(P)
        self.assertEqual(5, P.input_count)
        self.assertTrue(verify_parallelogram(z2, P, 1, 1))
        self.assertIsNone(search_parallelogram_term(raw_catalog('semilattice2')['SL2'], 2))
        with self.assertRaises(PreconditionError):
            search_parallelogram_term(z2['Z2'], 1)

    @classmethod
    def tearDownClass(cls):
        super(CircuitsTest, cls).tearDownClass()
        shutil.rmtree(CircuitsTest.test_dir, ignore_errors=True)
