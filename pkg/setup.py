"""Build hook for the optional compiled kernel.

The package is pure Python plus one Cython extension holding the scalar
channel-moment kernel. If Cython or a C compiler is unavailable the build
proceeds without the extension and the numpy fallback is used at runtime.
"""

import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("NETENT_SKIP_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "netent.core._kernels",
        ["src/netent/core/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    try:
        return cythonize([ext], compiler_directives={"language_level": "3"})
    except Exception:
        return []


setup(ext_modules=_extensions())
