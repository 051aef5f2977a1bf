"""Build hook for the optional compiled level-sweep extension.

The package works without it (a pure-Python backend is selected at import
time); any failure to cythonize or compile just skips the extension.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - toolchain-dependent
            print(f"skipping compiled extension: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - toolchain-dependent
            print(f"skipping {ext.name}: {exc}")


ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("oakplan._levels", ["src/oakplan/_levels.pyx"])],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - cython not installed
    print(f"cython unavailable, building pure-Python only: {exc}")

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
