import numpy
from setuptools import setup
from Cython.Build import cythonize

setup(
    ext_modules=cythonize(
        ["src/weakflow/_kernels_cy.pyx"],
        language_level=3,
        annotate=False,
    ),
    include_dirs=[numpy.get_include()],
)
