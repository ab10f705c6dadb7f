"""Build script: compiles the optional fast kernel, falls back to pure numpy."""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext = Extension(
        "treelet._build_core",
        ["src/treelet/_build_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # The compiled kernel must agree bit-for-bit with the numpy fallback:
        # -ffp-contract=off disables FMA contraction of a*b+c, and the
        # -fno-builtin-sin/cos pair stops gcc from fusing adjacent cos/sin
        # calls into glibc's sincos, whose sine can differ from sin() by one
        # ulp (disabling only the sincos builtin does not block that fusion).
        extra_compile_args=["-O3", "-ffp-contract=off",
                            "-fno-builtin-sin", "-fno-builtin-cos"],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
