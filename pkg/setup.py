"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time); compiling it speeds up the graph census and RICF fitting
considerably.  Build in place with:

    python setup.py build_ext --inplace
"""
import os

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext = Extension(
        "semalg._kernels._core",
        ["src/semalg/_kernels/_core.pyx"],
        optional=True,
    )
    ext_modules = cythonize(
        [ext],
        compiler_directives={"language_level": "3"},
        quiet=True,
    )
except ImportError:
    if os.environ.get("SEMALG_REQUIRE_EXT"):
        raise

setup(ext_modules=ext_modules)
