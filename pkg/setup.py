"""Build script.

The throughput kernels have a Cython implementation that is compiled here when
Cython and a C compiler are available.  The package is fully functional without
it: ``locus.throughput._dispatch`` falls back to the pure-Python twin at import
time, so a failed or skipped extension build only costs speed, not behavior.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("locus.throughput._kernels", ["src/locus/throughput/_kernels.pyx"])],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
