"""1D CNN for Raman-like spectra with gradient contribution maps."""

from ramcnn._core import *  # noqa: F401,F403
from ramcnn._core import __version__  # noqa: F401
