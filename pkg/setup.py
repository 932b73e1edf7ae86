"""Build script for the compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); building it makes the per-pixel kernels roughly an order of
magnitude faster. See benchmarks/bench_kernels.py.
"""

from setuptools import Extension, setup

import numpy as np
from Cython.Build import cythonize

ext = Extension(
    "anpr.kernels._native",
    ["src/anpr/kernels/_native.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O2"],
)

setup(ext_modules=cythonize(ext, language_level=3))
