import os

from setuptools import Extension, setup

# The LRU cache kernel is the hot inner loop of the simulator. It ships both
# as a Cython extension and as a pure-Python module; the package falls back to
# the pure version at import time if the extension is missing, so skipping the
# build (MR32_SKIP_EXT=1, or no Cython available) only costs speed.
ext_modules = []
if not os.environ.get("MR32_SKIP_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("mr32._cachekernel", ["src/mr32/_cachekernel.pyx"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
