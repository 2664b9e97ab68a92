"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python/numpy fallback is
selected at import time), so a failed compile downgrades to a warning
instead of aborting the install.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, etc.
            warnings.warn(f"pulsealign: compiled kernels skipped ({exc}); "
                          "falling back to pure-Python backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"pulsealign: building {ext.name} failed ({exc}); "
                          "falling back to pure-Python backend")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("pulsealign: Cython not available; "
                      "installing with pure-Python backend only")
        return []
    return cythonize(
        ["src/pulsealign/_kernels.pyx"],
        compiler_directives={"language_level": "3"},
    )


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
