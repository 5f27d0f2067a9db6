import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "motioncue._kernels._core",
        ["src/motioncue/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,  # pure-NumPy fallback is selected at import if the build fails
    )
]

setup(ext_modules=cythonize(extensions, language_level=3) if cythonize else [])
