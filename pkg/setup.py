"""Build script for the optional compiled convolution core.

The package is pure Python plus one Cython extension with the direct
cross-correlation loops.  The extension is marked optional: if it cannot
be compiled the install still succeeds and the package falls back to the
numpy lane at import time (see slicekit._kernels).
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # source tree without Cython: ship pure Python
    cythonize = None

extensions = []
if cythonize is not None:
    ext = Extension(
        "slicekit._kernels._convcore",
        ["src/slicekit/_kernels/_convcore.pyx"],
        extra_compile_args=["-O3"],
    )
    ext.optional = True  # a failed build degrades to the numpy lane
    extensions = cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=extensions)
