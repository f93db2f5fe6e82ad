name = "pysubbotin"
__version__ = "0.3.1"

from . import api
