"""Build the optional Cython kernels; the package works without them."""
from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("prcorr._kernels", ["src/prcorr/_kernels.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"],
                   define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                   optional=True)],
        compiler_directives={"language_level": "3"},
    )
except Exception:  # no Cython, no compiler, or a compile error: fall back to pure Python
    pass

setup(ext_modules=ext_modules)
