import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "lird.kernels._greedy",
                ["src/lird/kernels/_greedy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
        },
    )
except ImportError:
    # No Cython available: install pure-Python only; the kernel package
    # falls back to the numpy implementation at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
