"""Builds the optional Cython gate kernels.

The package works without the extension: qntklab.qsim falls back to a pure
numpy implementation when the compiled module is unavailable.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "qntklab.qsim._gates_cy",
                ["src/qntklab/qsim/_gates_cy.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
