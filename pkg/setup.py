"""Build script: compiles the optional fast kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); set ODSCALE_NO_EXT=1 to skip compilation explicitly.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("ODSCALE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("odscale._fdcore", ["src/odscale/_fdcore.pyx"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
