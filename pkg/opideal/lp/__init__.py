from .interface import *
from .highs import *
