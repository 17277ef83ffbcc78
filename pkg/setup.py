"""Build the optional compiled scan kernel.

Without Cython or a C compiler the package installs pure-Python and falls
back to the numpy kernel at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("HAARFACE_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "haarface._ckernels",
                    ["src/haarface/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
