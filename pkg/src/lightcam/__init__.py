"""Speaker-verification inference engine and complexity profiler.

Kept import-light on purpose: the CLI pins BLAS thread pools via
environment variables, which must happen before numpy is loaded.
Import the submodules directly (``lightcam.metrics``, ``lightcam.model``,
...) for the library API.
"""

__version__ = "0.1.0"
