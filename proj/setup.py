"""CMake-driven build of the stapsdr extension module.

Use `pip install -e . --no-build-isolation` (setuptools drives CMake for the
C++ core and drops stapsdr/_core into the package).
"""

import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name: str):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext: CMakeExtension) -> None:
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp) / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        ext_path = Path(self.get_ext_fullpath(ext.name)).resolve()
        pkg_dir = ext_path.parent
        pkg_dir.mkdir(parents=True, exist_ok=True)

        import pybind11

        cfg_args = [
            "cmake",
            "-S", str(source_dir),
            "-B", str(build_dir),
            "-DCMAKE_BUILD_TYPE=Release",
            "-DSTAPSDR_BUILD_TESTS=OFF",
            "-DSTAPSDR_BUILD_PYTHON=ON",
            f"-Dpybind11_DIR={pybind11.get_cmake_dir()}",
            f"-DPython3_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(cfg_args, check=True)
        jobs = os.environ.get("CMAKE_BUILD_PARALLEL_LEVEL", str(os.cpu_count() or 2))
        subprocess.run(["cmake", "--build", str(build_dir), "--target", "_core", "-j", jobs],
                       check=True)

        built = list((build_dir / "python_pkg" / "stapsdr").glob("_core*.so"))
        if not built:
            raise RuntimeError("CMake build did not produce the _core extension")
        self.copy_file(str(built[0]), str(ext_path))


setup(
    ext_modules=[CMakeExtension("stapsdr._core")],
    cmdclass={"build_ext": CMakeBuild},
)
