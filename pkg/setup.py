import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("CRNSIM_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("crnsim._gf256_ext", ["src/crnsim/_gf256_ext.pyx"])],
            language_level=3,
        )

setup(ext_modules=ext_modules)
