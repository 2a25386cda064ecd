"""Build script for the optional compiled kernels.

The package is fully functional without them (pure-Python twins are selected
at import time), so a missing compiler or Cython only costs speed.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    # fp-contract off so the compiled kernels stay bitwise-identical to the
    # pure-Python twins (no FMA fusion).
    flags = ["-O2", "-ffp-contract=off"]
    extensions = cythonize(
        [
            Extension(
                "koopcar._kernels._plant_cy",
                ["src/koopcar/_kernels/_plant_cy.pyx"],
                extra_compile_args=flags,
            ),
            Extension(
                "koopcar._kernels._qp_cy",
                ["src/koopcar/_kernels/_qp_cy.pyx"],
                extra_compile_args=flags,
            ),
        ],
        language_level=3,
    )
    for ext in extensions:
        ext.include_dirs.append(np.get_include())
except ImportError:
    extensions = []

setup(ext_modules=extensions)
