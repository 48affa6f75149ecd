import numpy as np
from context import subpower as sp
from subpower import settings
from subpower.algebra import Congruence, ProductContext, all_subuniverses, \
     algebra_from_subuniverse, as_rows, catalog_from_dict, check_identity, closure_steps, \
     find_isomorphism, identity_counterexample, is_subuniverse, quotient, \
     subalgebra_closure
from subpower.circuits import Circuit
from subpower.errors import CapExceededError, CatalogError, PreconditionError
from subpower.io_util import catalog_path
from base_test import SubpowerTest

ODD_GENERATORS = [[1,0,0],[0,1,0],[0,0,1]]

def raw_catalog(name):
    return sp.load_catalog(catalog_path(name))

class AlgebraTest(SubpowerTest):

    def testLoadCatalog(self):
        cat = raw_catalog('z4')
        self.assertEqual(['Z4'], cat.names())
        z4 = cat['Z4']
        self.assertEqual(4, z4.size)
        self.assertEqual(3, z4.signature.arity('m'))
        # m(x,y,z) = x - y + z
        self.assertEqual(3, int(z4.apply('m', 1, 2, 0)))
        self.assertEqual([2, 3], z4.apply('m', np.array([1, 2]), 3, 0).tolist())
        self.assertIsNone(cat.d)
        self.assertIn('cube_term', cat.raw_terms)
        with self.assertRaises(CatalogError):
            cat['Z5']

    def testMalformedCatalogs(self):
        signature = [{'symbol': 'm', 'arity': 3}]
        with self.assertRaises(CatalogError):
            catalog_from_dict({'signature': signature,
                               'algebras': [{'name': 'A', 'size': 2, 'ops': {'m': [0, 1]}}]})
        with self.assertRaises(CatalogError):
            catalog_from_dict({'signature': signature,
                               'algebras': [{'name': 'A', 'size': 2, 'ops': {'m': [0,1,1,0,1,0,0,2]}}]})
        with self.assertRaises(CatalogError):
            catalog_from_dict({'signature': signature,
                               'algebras': [{'name': 'A', 'size': 2, 'ops': {'m': [0,1,1,0,1,0,0,1]}},
                                            {'name': 'A', 'size': 2, 'ops': {'m': [0,1,1,0,1,0,0,1]}}]})
        with self.assertRaises(CatalogError):
            catalog_from_dict({'algebras': []})
        with self.assertRaises(CatalogError):
            catalog_from_dict({'signature': [{'symbol': 'f', 'arity': settings.arityCap + 1}],
                               'algebras': []})

    def testProductContext(self):
        cat = raw_catalog('z4')
        context = cat.context(['Z4'] * 3)
        self.assertEqual(3, context.n)
        self.assertEqual(64, context.size())
        out = context.apply('m', [[1, 2, 3], [1, 1, 1], [0, 0, 0]])
        self.assertEqual(np.uint8, out.dtype)
        self.assertEqual([0, 1, 2], out.tolist())
        batch = context.apply('m', [np.zeros((5, 3)), np.ones((5, 3)), np.ones((5, 3))])
        self.assertEqual((5, 3), batch.shape)
        sub = context.restrict([0, 2])
        self.assertEqual(2, sub.n)
        self.assertEqual([3, 3], sub.apply('m', [[1, 1], [2, 2], [0, 0]]).tolist())
        self.assertTrue(context.contains([3, 3, 3]))
        self.assertFalse(context.contains([4, 0, 0]))
        with self.assertRaises(PreconditionError):
            as_rows([[0, 4, 0]], context)
        with self.assertRaises(PreconditionError):
            as_rows([[0, 1]], context)
        with self.assertRaises(PreconditionError):
            ProductContext([])

    def testSubalgebraClosure(self):
        context = raw_catalog('z2').context(['Z2'] * 3)
        closure = subalgebra_closure(ODD_GENERATORS, context)
        self.assertTrue(closure.complete)
        self.assertEqual({(1,0,0), (0,1,0), (0,0,1), (1,1,1)}, closure.to_set())
        # generators come first, in input order
        self.assertEqual(ODD_GENERATORS, closure.elements[:3].tolist())
        self.assertEqual((None, (1,)), closure.parents[1])
        symbol, args = closure.parents[3]
        self.assertEqual('m', symbol)
        self.assertTrue(all(a < 3 for a in args))

        found = subalgebra_closure(ODD_GENERATORS, context, target=[1,1,1])
        self.assertIsNotNone(found.found)
        self.assertEqual([1,1,1], found.elements[found.found].tolist())
        missing = subalgebra_closure(ODD_GENERATORS, context, target=[1,1,0])
        self.assertIsNone(missing.found)
        self.assertTrue(missing.complete)
        self.assertNotIn([1,1,0], missing)

        with self.assertRaises(PreconditionError):
            subalgebra_closure([], context)

    def testClosureCap(self):
        context = raw_catalog('z2').context(['Z2'] * 3)
        settings.closureCap = 2
        with self.assertRaises(CapExceededError) as cm:
            subalgebra_closure(ODD_GENERATORS, context)
        self.assertEqual('closureCap', cm.exception.cap_name)
        self.assertEqual(2, cm.exception.limit)
        self.assertTrue(str(cm.exception).startswith('closure cap'))

        settings.set_defaults()
        settings.closureWorkCap = 10
        with self.assertRaises(CapExceededError) as cm:
            subalgebra_closure(ODD_GENERATORS, context)
        self.assertEqual('closureWorkCap', cm.exception.cap_name)

        # a walk on behalf of another caller reports under that caller's names
        steps = closure_steps(ODD_GENERATORS, context, cap_name='oracleCap', work_cap=10,
                              work_cap_name='oracleWorkCap')
        with self.assertRaises(CapExceededError) as cm:
            list(steps)
        self.assertEqual(('oracleWorkCap', 10), (cm.exception.cap_name, cm.exception.limit))
        self.assertTrue(str(cm.exception).startswith('oracle cap'))

    def testCongruence(self):
        theta = Congruence.from_labels('Z4', [5, 7, 5, 7])
        self.assertEqual((0, 1, 0, 1), theta.labels)
        self.assertEqual([[0, 2], [1, 3]], theta.blocks())
        self.assertEqual('02|13', str(theta))
        bottom = Congruence.identity('Z4', 4)
        top = Congruence.full('Z4', 4)
        self.assertTrue(bottom.leq(theta))
        self.assertTrue(theta.leq(top))
        self.assertFalse(top.leq(theta))
        self.assertEqual(theta, theta.meet(top))
        self.assertEqual(top, theta.join(Congruence.from_labels('Z4', [0, 0, 2, 2])))
        self.assertTrue(bottom.is_identity())
        self.assertTrue(top.is_full())

    def testQuotient(self):
        z4 = raw_catalog('z4')['Z4']
        q, natural = quotient(z4, Congruence.from_labels('Z4', [0, 1, 0, 1]))
        self.assertEqual(2, q.size)
        self.assertEqual([0, 1, 0, 1], natural)
        self.assertIsNotNone(find_isomorphism(q, raw_catalog('z2')['Z2']))
        with self.assertRaises(PreconditionError):
            quotient(z4, Congruence.from_labels('Z4', [0, 0, 2, 2]))

    def testIdentities(self):
        z2 = raw_catalog('z2')['Z2']
        m_xxy = Circuit(2, [('m', (0, 0, 1))], [2])
        self.assertTrue(check_identity(z2, m_xxy, Circuit(2, [], [1])))
        self.assertFalse(check_identity(z2, m_xxy, Circuit(2, [], [0])))
        self.assertEqual((0, 1), identity_counterexample(z2, m_xxy, Circuit(2, [], [0])))
        with self.assertRaises(PreconditionError):
            check_identity(z2, m_xxy, Circuit(3, [], [0]))

    def testSubuniverses(self):
        z4 = raw_catalog('z4')['Z4']
        subs = all_subuniverses(z4)
        # four singletons, the two cosets of {0,2} and Z4 itself
        self.assertEqual(7, len(subs))
        self.assertIn(frozenset({1, 3}), subs)
        self.assertNotIn(frozenset({0, 1}), subs)
        self.assertTrue(is_subuniverse(z4, [1, 3]))
        self.assertFalse(is_subuniverse(z4, [0, 1]))
        self.assertTrue(is_subuniverse(z4, []))
        z2 = raw_catalog('z2')
        odd = z2.context(['Z2'] * 3)
        self.assertTrue(is_subuniverse(None, [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]], odd))
        self.assertFalse(is_subuniverse(None, [[1, 0, 0], [0, 1, 0], [0, 0, 1]], odd))

    def testIsomorphism(self):
        z4 = raw_catalog('z4')['Z4']
        klein = raw_catalog('z2xz2')['Z2xZ2']
        self.assertIsNone(find_isomorphism(klein, z4))
        phi = find_isomorphism(z4, z4)
        self.assertEqual(4, len(set(phi)))
        self.assertTrue(sp.is_isomorphic(klein, klein))

    def testAlgebraFromSubuniverse(self):
        context = raw_catalog('z2').context(['Z2'] * 3)
        odd = subalgebra_closure(ODD_GENERATORS, context).to_set()
        alg = algebra_from_subuniverse('odd', sorted(odd), context)
        self.assertEqual(4, alg.size)
        self.assertIsNotNone(find_isomorphism(alg, raw_catalog('z2xz2')['Z2xZ2']))
        with self.assertRaises(PreconditionError):
            algebra_from_subuniverse('bad', ODD_GENERATORS, context)

    def testEvalCircuit(self):
        context = raw_catalog('z2').context(['Z2'] * 3)
        m = Circuit(3, [('m', (0, 1, 2))], [3])
        self.assertEqual([1, 1, 1], m.evaluate(context, ODD_GENERATORS).tolist())
        with self.assertRaises(TypeError):
            m.evaluate(context, ODD_GENERATORS[:2])

    def testCatalogMemo(self):
        cat = raw_catalog('z2')
        calls = []
        self.assertEqual(1, cat.memo('key', lambda: calls.append(1) or 1))
        self.assertEqual(1, cat.memo('key', lambda: calls.append(1) or 2))
        self.assertEqual(1, len(calls))
        with self.assertRaises(CatalogError):
            cat.add_algebra(cat['Z2'])
