import subprocess

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

CORE_SOURCES = [
    "bindings/module.cpp",
    "src/fft.cpp",
    "src/geometry.cpp",
    "src/diffuser.cpp",
    "src/render.cpp",
    "src/conv_operator.cpp",
    "src/solver.cpp",
    "src/analysis.cpp",
    "src/container.cpp",
    "src/run_config.cpp",
    "src/png_io.cpp",
]


def eigen_include():
    try:
        out = subprocess.run(
            ["pkg-config", "--cflags-only-I", "eigen3"],
            capture_output=True, text=True, check=True,
        ).stdout
        for token in out.split():
            if token.startswith("-I"):
                return token[2:]
    except (OSError, subprocess.CalledProcessError):
        pass
    return "/usr/include/eigen3"


ext = Pybind11Extension(
    "lensless3d._core",
    CORE_SOURCES,
    include_dirs=["include", "vendor", eigen_include()],
    libraries=["fftw3", "fftw3f", "png"],
    cxx_std=20,
)

setup(
    packages=["lensless3d"],
    package_dir={"": "python"},
    ext_modules=[ext],
    cmdclass={"build_ext": build_ext},
)
