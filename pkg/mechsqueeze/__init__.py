from .gaussian import *
from .optomech import *
from .base import *
__version__ = '0.1.0'
