"""Build script for the optional compiled kernels.

The package works without the extension (a pure-Python fallback is selected
at import time); building it just makes tokenization and featurization faster.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "bepath._kernels._speedups",
                ["src/bepath/_kernels/_speedups.pyx"],
            )
        ],
        language_level=3,
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
