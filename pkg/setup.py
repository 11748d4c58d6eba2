import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("LARVEST_NO_EXTENSION") != "1":
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "larvest._dyncore",
                ["src/larvest/_dyncore.pyx"],
                include_dirs=[np.get_include()],
                # keep IEEE semantics so the extension matches the fallback bit for bit
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
