"""Build script: compiles the optional convolution/pooling kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes the hot forward/backward kernels faster.

    pip install -e . --no-build-isolation
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "mprtbench._convkernels",
                sources=["src/mprtbench/_convkernels.pyx"],
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
            "language_level": "3",
        },
    )
else:
    extensions = []

setup(ext_modules=extensions)
