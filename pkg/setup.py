"""Build script for the compiled registration kernels.

The Cython extension is optional: if Cython or a C compiler is unavailable the
package installs without it and ``radarloc.registration.kernels`` falls back to
the NumPy implementation at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("RADARLOC_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        extensions = [
            Extension(
                "radarloc.registration.kernels._ckernels",
                ["src/radarloc/registration/kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # no -ffast-math: oracle and fast paths must round identically
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
