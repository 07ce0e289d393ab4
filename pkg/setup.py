"""Build script: compiles the optional Cython stepping kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile degrades to a warning instead of
aborting the install.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "crisislab._kernels._speedups",
                ["src/crisislab/_kernels/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"warning: Cython kernels not built ({exc}); pure-python fallback will be used\n")

setup(ext_modules=ext_modules)
