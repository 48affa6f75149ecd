import itertools, time
import numpy as np
from context import subpower as sp
from subpower.congruence import AbelianGroupTable, induced_abelian_group
from subpower.algebra import Congruence, subalgebra_closure
from subpower.cli import make_instance
from subpower.errors import CapExceededError, CatalogError, IdentityError, \
     MethodUnavailableError, PreconditionError
from subpower.io_util import catalog_path
from subpower.solvers import METHODS, SmpInstance, abelian_sift, check_d_coherent, \
     coherent_parts, lift_instance, membership_criterion, reduce_hs, reduce_to_d_coherent, \
     smp_brute, solve, solve_compact, solve_smpd_rs
from base_test import SubpowerTest

ODD_GENERATORS = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
Z4_MOD_2 = 'Z4[0,1,2,3]/02|13'

def run_test(cat, name, rng, trials, methods, n_range=(2, 7), k_range=(1, 5)):
    '''
    Answers random instances over powers of one algebra with every method in
    `methods` and with brute force; half of the targets are members. On YES
    the compact path also extracts a witness circuit, which has to evaluate
    to the target.

    :return: the number of disagreements and (gates, k, n) per witness
    '''
    failures, witnesses = 0, []
    size = cat[name].size
    for _ in range(trials):
        n = int(rng.integers(*n_range))
        k = int(rng.integers(*k_range))
        gens = rng.integers(0, size, size=(k, n))
        context = cat.context([name] * n)
        closure = subalgebra_closure(gens, context).elements
        if rng.integers(2):
            target = closure[int(rng.integers(len(closure)))]
        else:
            target = rng.integers(0, size, size=n)
        instance = SmpInstance([name] * n, gens, target)
        expected = smp_brute(instance, cat).verdict
        for method in methods:
            witness = method == 'compact' and expected
            answer = solve(instance, cat, method, witness=witness)
            if answer.verdict != expected:
                failures += 1
            elif witness:
                value = answer.witness.circuit.evaluate(context, [np.asarray(g) for g in gens])
                if np.asarray(value).tolist() != instance.target.tolist():
                    failures += 1
                witnesses.append((answer.witness.gates, k, n))
    return failures, witnesses

def subdirect_generators(cat, name, n, rng):
    '''
    Random generators of a subalgebra of the n-th power that projects onto
    every factor

    :return: the generators as a (k, n) array
    '''
    size = cat[name].size
    context = cat.context([name] * n)
    while True:
        gens = rng.integers(0, size, size=(int(rng.integers(1, 4)), n))
        B = subalgebra_closure(gens, context).elements
        if all(len(np.unique(B[:, j])) == size for j in range(n)):
            return gens

class SolversTest(SubpowerTest):

    def setUp(self):
        SubpowerTest.setUp(self)
        self.z2 = self.catalog('z2')

    def odd(self, target, factor='Z2'):
        return SmpInstance([factor] * 3, ODD_GENERATORS, target)

    def testInstance(self):
        instance = self.odd([1, 1, 1])
        self.assertEqual(3, instance.n)
        self.assertEqual(3, instance.k)
        self.assertEqual({'factors': ['Z2'] * 3, 'generators': ODD_GENERATORS, 'target': [1, 1, 1]},
                         instance.to_dict())
        self.assertEqual(1, SmpInstance(['Z2', 'Z2'], [0, 1], [1, 0]).k)

        with self.assertRaises(PreconditionError):
            SmpInstance([], [[0]], [0])
        with self.assertRaises(PreconditionError):
            SmpInstance(['Z2'] * 3, ODD_GENERATORS, [1, 1])
        with self.assertRaises(PreconditionError):
            SmpInstance(['Z2'] * 3, [[1, 0]], [1, 1, 1])
        with self.assertRaises(PreconditionError):
            self.odd([2, 0, 0]).context(self.z2)
        with self.assertRaises(CatalogError):
            SmpInstance.from_dict({'factors': ['Z2']})
        self.assertEqual([1, 1, 1], SmpInstance.from_dict(instance.to_dict()).target.tolist())

    def testAnswer(self):
        answer = smp_brute(self.odd([1, 1, 0]), self.z2)
        self.assertEqual('NO', answer.label)
        self.assertEqual(4, answer.closure_size)
        self.assertEqual({'verdict', 'method', 'micros'}, set(answer.to_dict()))
        self.assertEqual('w.json', answer.to_dict('w.json')['witness_file'])

    def testBruteForce(self):
        yes = smp_brute(self.odd([1, 1, 1]), self.z2, witness=True)
        self.assertTrue(yes.verdict)
        self.assertEqual('brute', yes.method)
        context = self.z2.context(['Z2'] * 3)
        value = yes.witness.circuit.evaluate(context, [np.asarray(g) for g in ODD_GENERATORS])
        self.assertEqual([1, 1, 1], np.asarray(value).tolist())
        self.assertIsNone(smp_brute(self.odd([1, 1, 0]), self.z2, witness=True).witness)

    def testSolveCompact(self):
        answer = solve_compact(self.odd([1, 1, 1]), self.z2, witness=True)
        self.assertTrue(answer.verdict)
        self.assertEqual('compact', answer.method)
        context = self.z2.context(['Z2'] * 3)
        value = answer.witness.circuit.evaluate(context, [np.asarray(g) for g in ODD_GENERATORS])
        self.assertEqual([1, 1, 1], np.asarray(value).tolist())
        self.assertLessEqual(answer.witness.p_gates, answer.witness.gates)

        self.assertFalse(solve_compact(self.odd([1, 1, 0]), self.z2).verdict)
        # a projection that is not generated is answered before any oracle round
        no = solve_compact(SmpInstance(['Z2'] * 3, [[1, 0, 0], [1, 1, 0]], [0, 1, 1]), self.z2)
        self.assertFalse(no.verdict)
        self.assertNotIn('rounds', no.details)

        with self.assertRaises(PreconditionError):
            solve_compact(SmpInstance(['L2'] * 2, [[0, 1]], [0, 1]), self.catalog('lattice2'))
        semilattice = sp.load_catalog(catalog_path('semilattice2'))
        with self.assertRaises(PreconditionError):
            solve_compact(SmpInstance(['SL2'] * 2, [[0, 1]], [0, 1]), semilattice)

    def testSolveMethods(self):
        for method in METHODS:
            self.assertTrue(solve(self.odd([1, 1, 1]), self.z2, method).verdict, method)
            self.assertFalse(solve(self.odd([1, 1, 0]), self.z2, method).verdict, method)
        self.assertEqual('rs', solve(self.odd([1, 1, 1]), self.z2, 'rs').method)
        self.assertEqual('brute', solve(SmpInstance(['L2'], [[0], [1]], [1]),
                                        self.catalog('lattice2')).method)
        with self.assertRaises(PreconditionError):
            solve(self.odd([1, 1, 1]), self.z2, 'guess')

        lattice = self.catalog('lattice2')
        gens = [[0, 1, 1, 0], [1, 0, 1, 1], [0, 0, 1, 1]]
        self.assertTrue(solve(SmpInstance(['L2'] * 4, gens, [0, 0, 1, 0]), lattice).verdict)
        self.assertFalse(solve(SmpInstance(['L2'] * 4, gens, [1, 1, 0, 1]), lattice).verdict)

    def testResidualSmallnessRequired(self):
        q8 = self.catalog('q8')
        instance = SmpInstance(['Q8'] * 2, [[1, 2]], [1, 2])
        with self.assertRaises(MethodUnavailableError):
            solve(instance, q8, 'rs')
        with self.assertRaises(MethodUnavailableError):
            solve_smpd_rs(instance, q8)

    def testHsReduction(self):
        z4 = self.catalog('z4')
        lifted, theta = lift_instance(self.odd([1, 1, 1], Z4_MOD_2), z4)
        self.assertEqual(['Z4'] * 3, lifted.factors)
        self.assertEqual([[0, 2], [1, 3]], sorted(sorted(block) for block in theta[0]))

        for method in ('auto', 'brute'):
            self.assertTrue(solve(self.odd([1, 1, 1], Z4_MOD_2), z4, method).verdict)
            self.assertFalse(solve(self.odd([1, 1, 0], Z4_MOD_2), z4, method).verdict)
        answer = reduce_hs(self.odd([1, 1, 1], Z4_MOD_2), z4)
        self.assertEqual('reduction', answer.method)
        self.assertGreaterEqual(answer.details['generators'], 3)

        with self.assertRaises(PreconditionError):
            lift_instance(self.odd([1, 1, 1], 'Nope'), z4)

    def testDCoherence(self):
        self.assertEqual((True, None), check_d_coherent(self.odd([1, 1, 0]), self.z2))
        self.assertEqual((False, 1), check_d_coherent(SmpInstance(['Z2'] * 2, [[0, 1]], [0, 1]), self.z2))
        self.assertEqual((False, 2), check_d_coherent(
            SmpInstance(['Z2'] * 3, [[1, 0, 0], [1, 1, 0]], [1, 1, 0]), self.z2))
        self.assertEqual((False, 3), check_d_coherent(
            SmpInstance(['L2'] * 3, [[0, 1, 0], [1, 0, 1]], [0, 1, 0]), self.catalog('lattice2')))
        self.assertEqual((False, 4), check_d_coherent(
            SmpInstance(['Z2'] * 3, [[0, 0, 0], [1, 1, 1]], [1, 0, 0]), self.z2))

    def testCoherentParts(self):
        split = coherent_parts(self.odd([1, 1, 1]), self.z2)
        self.assertIsNone(split.verdict)
        self.assertEqual(1, len(split.pieces))
        self.assertEqual(3, split.pieces[0].n)

        self.assertEqual('small arity', coherent_parts(
            SmpInstance(['Z2'] * 2, [[0, 1]], [0, 1]), self.z2).reason)
        self.assertFalse(coherent_parts(
            SmpInstance(['Z2'] * 3, [[0, 0, 0], [1, 1, 1]], [1, 0, 0]), self.z2).verdict)
        trivial = coherent_parts(SmpInstance(['Z2'] * 3, [[1, 0, 0], [1, 1, 1]], [1, 1, 1]), self.z2)
        self.assertTrue(trivial.verdict)
        self.assertEqual('at most 2 nontrivial coordinates', trivial.reason)

    def testReduction(self):
        yes = reduce_to_d_coherent(self.odd([1, 1, 1]), self.z2)
        self.assertTrue(yes.verdict)
        self.assertEqual(1, yes.details['pieces'])
        self.assertFalse(reduce_to_d_coherent(self.odd([1, 1, 0]), self.z2).verdict)
        self.assertTrue(membership_criterion(self.odd([1, 1, 1]), self.z2))
        self.assertFalse(membership_criterion(self.odd([1, 1, 0]), self.z2))

    def testResiduallySmallPath(self):
        answer = solve_smpd_rs(self.odd([1, 1, 1]), self.z2)
        self.assertTrue(answer.verdict)
        self.assertEqual(1, answer.details['transversal'])
        self.assertFalse(solve_smpd_rs(self.odd([1, 1, 0]), self.z2).verdict)

    def testAbelianSift(self):
        z4 = self.catalog('z4')
        groups = [induced_abelian_group(self.z2['Z2'], Congruence.full('Z2', 2), 0, self.z2.difference_term),
                  induced_abelian_group(z4['Z4'], Congruence.full('Z4', 4), 0, z4.difference_term)]
        H = [[1, 2]]
        self.assertFalse(abelian_sift(groups, H, [1, 1]))
        self.assertTrue(abelian_sift(groups, H, [1, 2]))
        self.assertTrue(abelian_sift(groups, H, [0, 0]))
        self.assertFalse(abelian_sift(groups, H, [0, 2]))
        self.assertTrue(abelian_sift(groups, [[1, 2], [0, 1]], [1, 1]))
        self.assertTrue(abelian_sift(groups, [[0, 1]], [0, 3]))

        broken = AbelianGroupTable((0, 1), 0, np.array([[0, 1], [0, 1]]), np.array([0, 1]))
        with self.assertRaises(IdentityError):
            abelian_sift([broken], [[1]], [1])

    def testStructureCriterion(self):
        # every tuple of the product is checked, so the powers stay small
        cases = [('z2', 'Z2', (3, 6)), ('z3', 'Z3', (3, 5)), ('z4', 'Z4', (3, 4)),
                 ('z2xz2', 'Z2xZ2', (3, 4)), ('lattice2', 'L2', (3, 6))]
        catalogs = {label: self.catalog(label) for label, _, _ in cases}
        for trial in range(max(50, SubpowerTest.trials)):
            label, name, n_range = cases[trial % len(cases)]
            cat = catalogs[label]
            n = int(self.rng.integers(*n_range))
            gens = subdirect_generators(cat, name, n, self.rng)
            B = {tuple(r) for r in subalgebra_closure(gens, cat.context([name] * n)).elements.tolist()}
            for target in itertools.product(range(cat[name].size), repeat=n):
                self.assertEqual(target in B, membership_criterion(SmpInstance([name] * n, gens, target), cat),
                                 '{} generators {} target {}'.format(name, gens.tolist(), target))

    def testCompactScale(self):
        instance = make_instance(self.z2, 'coset', 50, 50, np.random.default_rng(3))
        start = time.perf_counter()
        answer = solve(instance, self.z2, 'compact')
        self.assertTrue(answer.verdict)
        self.assertLess(time.perf_counter() - start, 5.0)

        with self.assertRaises(CapExceededError):
            smp_brute(make_instance(self.z2, 'coset', 25, 25, np.random.default_rng(3)), self.z2)

    def testAgreesWithBruteForce(self):
        '''
        S3 stays at n <= 3 with at most two generators: brute force closes
        subgroups of S3^4 only past closureWorkCap.
        '''
        trials = SubpowerTest.agreement_trials
        cases = [('z2', 'Z2', (2, 7), (1, 5)), ('z3', 'Z3', (2, 7), (1, 5)),
                 ('z4', 'Z4', (2, 7), (1, 5)), ('z2xz2', 'Z2xZ2', (2, 7), (1, 5)),
                 ('s3', 'S3', (2, 4), (1, 3)), ('lattice2', 'L2', (3, 7), (1, 5))]
        for label, name, n_range, k_range in cases:
            cat = self.catalog(label)
            failures, witnesses = run_test(cat, name, self.rng, trials, ('compact', 'reduction', 'rs'),
                                           n_range, k_range)
            self.assertEqual(0, failures, name)
            self.assertTrue(witnesses, name)
            # one constant fitted on the smaller powers bounds every witness
            ratios = [(gates / (k * n ** (cat.d + 2)), n) for gates, k, n in witnesses]
            fitted = max(r for r, n in ratios if n <= 4)
            for r, n in ratios:
                self.assertLessEqual(r, 4 * fitted, '{} n={}'.format(name, n))
