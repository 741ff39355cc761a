import os

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext as _build_ext


class optional_build_ext(_build_ext):
    """Build the compiled kernels, falling back to pure NumPy when impossible."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, broken toolchain, ...
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building tacflow._native failed ({exc}); "
            "the package will run on the pure-NumPy kernels."
        )


def extensions():
    if not os.path.exists("src/tacflow/_native.pyx"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    compile_args = ["-O3"]
    link_args = []
    if not os.environ.get("TACFLOW_NO_OPENMP"):
        compile_args.append("-fopenmp")
        link_args.append("-fopenmp")
    ext = Extension(
        "tacflow._native",
        sources=["src/tacflow/_native.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=compile_args,
        extra_link_args=link_args,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(cmdclass={"build_ext": optional_build_ext}, ext_modules=extensions())
