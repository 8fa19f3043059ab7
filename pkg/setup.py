import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off: the compiled kernel must be bit-identical to the pure
# numpy backend, so fused multiply-adds are disabled.
setup(
    ext_modules=cythonize(
        [
            Extension(
                "irforest._kernels.fast",
                ["src/irforest/_kernels/fast.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
)
