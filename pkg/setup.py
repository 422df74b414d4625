import os

import numpy
from setuptools import Extension, setup

# FFDRECON_NO_EXT=1 skips the compiled kernels; the package then runs on its numpy fallback.
if os.environ.get("FFDRECON_NO_EXT"):
    extensions = []
else:
    try:
        from Cython.Build import cythonize

        extensions = cythonize(
            [
                Extension(
                    "ffdrecon._kernels._ckernels",
                    ["src/ffdrecon/_kernels/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3", "embedsignature": True},
        )
    except ImportError:
        extensions = []

setup(ext_modules=extensions)
