"""Python bindings for the prpolab policy-optimization laboratory."""

try:
    from ._prpolab import *  # noqa: F401,F403
    from ._prpolab import __doc__  # noqa: F401
except ImportError:
    # development layout: the compiled module sits on sys.path directly
    # (e.g. a CMake build tree) instead of inside the package
    from _prpolab import *  # noqa: F401,F403
    from _prpolab import __doc__  # noqa: F401
