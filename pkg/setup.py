import numpy
from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to the pure
# numpy implementations in sbfmc._kernels_py when the extension is absent.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "sbfmc._kernels",
                ["src/sbfmc/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
