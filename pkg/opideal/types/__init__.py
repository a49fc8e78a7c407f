from .exponents import *
from .spaces import *
from .certificates import *
from .reports import *
