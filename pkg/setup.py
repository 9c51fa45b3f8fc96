"""Build the optional compiled kernel extension.

The package works without it (a numpy fallback is selected at import); any
build failure therefore only costs speed, not functionality.
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        name="hierminer._kernels._core",
        sources=["src/hierminer/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
