"""Build hook for the optional compiled kernel backend.

The package is fully functional without the extension (a NumPy reference
backend is selected at import time); building it just makes the hot kernels
faster. Build in place with

    python setup.py build_ext --inplace
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/prden/kernels/_native.pyx",
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
        ext.extra_compile_args = ["-O3", "-march=native", "-funroll-loops"]
except ImportError:
    pass

setup(ext_modules=ext_modules)
