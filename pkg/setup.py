"""Build script for the optional compiled kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time); the extension only accelerates the conv2d and dart-throwing
inner loops.  Build failures are therefore non-fatal.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # pure-python install still works
    ext_modules = []
else:
    ext = Extension(
        "maskopt._kernels._fast",
        ["src/maskopt/_kernels/_fast.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
