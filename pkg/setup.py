"""Build script: compiles the threshold-scan kernel when Cython is available.

The package works without the extension (a pure-Python scan is selected at
import time), so a failed compile must never break installation.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    # No -ffast-math: the kernel must be IEEE-exact so that the compiled and
    # pure-Python backends select identical splits.
    ext_modules = cythonize(
        [
            "src/partition_tree/_scan_cy.pyx",
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": False,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
