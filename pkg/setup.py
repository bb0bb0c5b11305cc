"""Build script: compiles the kernel extension when Cython and a C++
toolchain are available, otherwise installs with the pure-Python fallback."""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Let the install proceed without the extension on build failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"warning: building the reloc2d._kernels._core extension failed "
            f"({exc}); falling back to the pure-Python kernels",
            file=sys.stderr,
        )


ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "reloc2d._kernels._core",
                ["src/reloc2d/_kernels/_core.pyx"],
                language="c++",
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off: no fused multiply-add, so float results
                # match the pure-Python backend bit for bit
                # -fno-builtin-sincos: keep cos/sin as separate libm calls
                # (the fused sincos can differ from them by one ulp)
                extra_compile_args=["-O3", "-ffp-contract=off",
                                    "-fno-builtin-sin", "-fno-builtin-cos",
                                    "-fno-builtin-sincos"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError as exc:
    print(f"warning: Cython unavailable ({exc}); installing without the "
          f"compiled kernels", file=sys.stderr)

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
