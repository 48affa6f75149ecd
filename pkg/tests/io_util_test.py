import os, shutil
from pathlib import Path
from context import subpower as sp
from subpower import io_util
from subpower.errors import CatalogError
from base_test import SubpowerTest

class IOUtilTest(SubpowerTest):

    @classmethod
    def setUpClass(cls):
        super(IOUtilTest, cls).setUpClass()
        IOUtilTest.io_test_dir = '{}/io_util_test/'.format(os.getcwd())
        io_util.get_directory(IOUtilTest.io_test_dir)

    def testGetDirectory(self):
        shutil.rmtree(Path(IOUtilTest.io_test_dir))
        self.assertFalse(os.path.exists(IOUtilTest.io_test_dir))
        io_util.get_directory(IOUtilTest.io_test_dir)
        self.assertTrue(os.path.exists(IOUtilTest.io_test_dir))

    def testJson(self):
        path = '{}/instance.json'.format(IOUtilTest.io_test_dir)
        data = {'target': [1, 1, 1], 'factors': ['Z2', 'Z2', 'Z2']}
        io_util.write_json(path, data)
        self.assertEqual(data, io_util.read_json(path))
        with open(path) as f:
            self.assertTrue(f.read().startswith('{"factors"'))

        with open(path, 'w') as f:
            f.write('{"factors": [')
        with self.assertRaises(CatalogError):
            io_util.read_json(path)
        with self.assertRaises(OSError):
            io_util.read_json('{}/missing.json'.format(IOUtilTest.io_test_dir))
        Path.unlink(Path(path))

    def testCatalogPath(self):
        self.assertTrue(io_util.catalog_path('z2').endswith('z2.json'))
        self.assertTrue(io_util.catalog_path('maltsev_p.json').endswith('maltsev_p.json'))
        self.assertTrue(os.path.isfile(io_util.catalog_path('lattice2')))
        with self.assertRaises(CatalogError):
            io_util.catalog_path('no_such_catalog')

    def testWriteCsv(self):
        path = '{}/bench.csv'.format(IOUtilTest.io_test_dir)
        text = io_util.write_csv(path, ('n', 'verdict'), [[4, 'YES'], [6, 'cap']])
        self.assertEqual('n,verdict\n4,YES\n6,cap\n', text)
        with open(path) as f:
            self.assertEqual(text, f.read())
        self.assertEqual('n\n', io_util.write_csv(None, ('n',), []))

    @classmethod
    def tearDownClass(cls):
        super(IOUtilTest, cls).tearDownClass()
        shutil.rmtree(Path(IOUtilTest.io_test_dir), ignore_errors=True)
