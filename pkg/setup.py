import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("REPLICALOAD_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        # pure-Python install; _core falls back to _pykernels
        pass
    else:
        ext_modules = cythonize(
            Extension(
                "replicaload._kernels",
                ["src/replicaload/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            ),
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
