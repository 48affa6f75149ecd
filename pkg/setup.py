from setuptools import setup
from os import path


here = path.abspath(path.dirname(__file__))
# Get the long description from the README file
with open(path.join(here, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

with open(path.join(here, 'VERSION'), 'r') as f:
    version = f.read().strip()


setup(
    name='subpower',  # Required

    version=version,  # Required

    description='Subpower membership, compact representations and witness circuits '
                'for finite algebras with a cube term',  # Optional

    long_description=long_description,  # Optional
    long_description_content_type='text/markdown',  # Optional

    classifiers=[  # Optional
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.7',
        'Programming Language :: Python :: 3.8',
    ],

    keywords='universal algebra, subpower membership, cube term, parallelogram term',  # Optional

    packages=['subpower'],  # Required

    python_requires='>=3.7',

    install_requires=['numpy', 'typeguard'],  # Optional

    extras_require={  # Optional
        'dev': ['pytest', 'pytest-env'],
    },

    # Bundled algebra and term catalogs resolved by name (z2, s3, maltsev_p, ...)
    package_data={  # Optional
        'subpower': ['catalogs/*.json'],
    },

    entry_points={  # Optional
        'console_scripts': [
            'subpower=subpower.cli:main',
        ],
    },
)
