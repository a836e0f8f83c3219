"""Builds the optional compiled kernel extension.

The package is fully functional without it (the pure-Python kernels are
selected at import time), so build failures only cost speed.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, header mismatch, ...
            print(f"WARNING: compiled kernels skipped ({exc}); "
                  "falling back to the pure-Python backend", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: building {ext.name} failed ({exc}); "
                  "falling back to the pure-Python backend", file=sys.stderr)


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print(f"WARNING: {exc}; compiled kernels skipped", file=sys.stderr)
        return []
    return cythonize(
        [Extension(
            "miqes._kernels._core",
            ["src/miqes/_kernels/_core.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
        )],
        compiler_directives={"language_level": "3"},
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
