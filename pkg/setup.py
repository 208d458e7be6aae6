"""Build script: compiles the optional fast-kernel extension.

The package works without the extension (a pure numpy backend is selected
at import time), so a missing Cython/compiler only costs speed.
Build in place with `python setup.py build_ext --inplace` or just
`pip install -e . --no-build-isolation`.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "lrtc.kernels._compiled",
                sources=["src/lrtc/kernels/_compiled.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules, zip_safe=False)
