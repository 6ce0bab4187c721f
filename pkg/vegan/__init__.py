from _vegan import *  # noqa: F403
from _vegan import __all__ as __all__
