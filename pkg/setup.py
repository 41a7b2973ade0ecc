"""Build script: compiles the optional Cython kernel core.

If Cython or a C compiler is unavailable the install still succeeds;
vlmlab.diffcore.kernels falls back to the numpy implementations at import.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "vlmlab.diffcore._kernels_cy",
                ["src/vlmlab/diffcore/_kernels_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
