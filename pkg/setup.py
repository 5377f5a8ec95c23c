"""Build script: compiles the optional scoring-kernel extension.

The extension is a pure optimization; if Cython or a C compiler is
unavailable the package installs anyway and falls back to the numpy
kernels at import time.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


def make_extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "embir._ckernels",
        ["src/embir/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        # No -ffast-math: scoring must keep IEEE semantics so both
        # kernel backends agree and runs stay bit-reproducible.
        extra_compile_args=["-O2"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )


class OptionalBuildExt(build_ext):
    """Build the extension if possible, warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"embir: C extension build failed ({exc}); "
                          "falling back to pure-Python kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"embir: building {ext.name} failed ({exc}); "
                          "falling back to pure-Python kernels")


setup(ext_modules=make_extensions(), cmdclass={"build_ext": OptionalBuildExt})
