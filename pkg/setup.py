import os

from setuptools import find_packages, setup

# name: this is the name of the distribution.
# Packages using the same name here cannot be installed together

version_path = os.path.join(
    os.path.abspath(os.path.dirname(__file__)),
    'ncbt', 'version.py',
)
with open(version_path) as fp:
    exec(fp.read())

setup(
    name='ncbt',
    version=str(__version__),
    packages=find_packages(exclude=['test']),
    description=(
        'Non-commutative Brillouin torus: twisted crossed-product arithmetic,'
        ' disordered magnetic lattice models and Chern invariants'
    ),
    license='LGPL-2.1',
    python_requires='>=3.9',
    install_requires=[
        'numpy',
        'scipy',
        'joblib',
        'tomli; python_version < "3.11"',
    ],
    tests_require=['pytest'],
    entry_points={
        'console_scripts': [
            'ncbt = ncbt.cli:main',
        ],
    },
    include_package_data=True,
)
