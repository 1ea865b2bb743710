import os

from setuptools import Extension, setup

# The compiled kernels are optional: mmvnmf falls back to the pure-Python
# implementation at import time when the extension is absent.  Set
# MMVNMF_NO_EXT=1 to skip compilation entirely.
ext_modules = []
if os.environ.get("MMVNMF_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("mmvnmf._kernels", ["src/mmvnmf/_kernels.pyx"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
