import subprocess
import sys
from pathlib import Path

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.extension import Extension


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        src = Path(__file__).parent.resolve()
        out = Path(self.get_ext_fullpath(ext.name)).parent.resolve()
        build = Path(self.build_temp).resolve()
        build.mkdir(parents=True, exist_ok=True)
        subprocess.run(
            [
                "cmake",
                str(src),
                "-DCMAKE_BUILD_TYPE=Release",
                f"-DPython_EXECUTABLE={sys.executable}",
                f"-DCMAKE_LIBRARY_OUTPUT_DIRECTORY={out}",
            ],
            cwd=build,
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_slicewave", "-j"],
            cwd=build,
            check=True,
        )


setup(
    ext_modules=[CMakeExtension("slicewave._slicewave")],
    cmdclass={"build_ext": CMakeBuild},
)
