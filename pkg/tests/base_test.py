import unittest, os
import importlib
import numpy as np
from context import subpower as sp
from subpower import settings
from subpower.cli import load_configured_catalog

'''
SubpowerTest defines the base test logic shared by the subpower TestCase classes:
it checks the test tooling once per class, resets every cap before each test and
hands out seeded random generators and configured bundled catalogs.

Note: each subpower TestCase class extends SubpowerTest and encompasses 1..n test methods, the
names of which match the pattern 'test*' (e.g., SolversTest.test_odd_coset).
'''
class SubpowerTest(unittest.TestCase):

    verbose = True if os.getenv('SUBPOWER_VERBOSE') == 'True' else False
    seed = int(os.getenv('SUBPOWER_TEST_SEED', 1))
    trials = int(os.getenv('SUBPOWER_RANDOM_TRIALS', 25))
    agreement_trials = int(os.getenv('SUBPOWER_AGREEMENT_TRIALS', 500))

    @classmethod
    def setUpClass(cls):
        '''
        Checks the test libraries and sets the verbosity of the subpower loggers

        :return: None
        :raise: EnvironmentError if 1..n required test libraries are missing
        '''
        if not importlib.util.find_spec('pytest') or not importlib.util.find_spec('pytest_env'):
            raise EnvironmentError('pytest and pytest-env must be installed')
        if SubpowerTest.verbose:
            sp.enableVerbose()

    def setUp(self):
        '''
        Resets every cap so a test that lowers one cannot leak it

        :return: None
        '''
        settings.set_defaults()
        self.rng = np.random.default_rng(SubpowerTest.seed)

    def tearDown(self):
        settings.set_defaults()

    @staticmethod
    def catalog(name, term=None):
        '''
        Loads a bundled catalog (z2, z3, z4, z2xz2, s3, q8, lattice2) with its cube term

        :return: the configured Catalog
        '''
        return load_configured_catalog(name, term)
