"""Build script for the optional compiled kernels.

The package works without the extension: ``shell_lab._kernels`` falls back to
the numpy implementations when ``shell_lab._core`` cannot be imported.

    pip install -e . --no-build-isolation
    python setup.py build_ext --inplace
"""

import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build without Cython
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("SHELL_LAB_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "shell_lab._core",
                ["src/shell_lab/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
