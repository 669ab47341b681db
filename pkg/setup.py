import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext = Extension(
    "scimigrate._kernels._native",
    ["src/scimigrate/_kernels/_native.pyx"],
    include_dirs=[numpy.get_include()],
    extra_compile_args=["-O3"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

# Without Cython the package installs pure-Python; the kernel shim falls back.
setup(ext_modules=cythonize([ext], language_level="3") if cythonize else [])
