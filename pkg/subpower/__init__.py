from subpower.errors import *
from subpower.logger import *
from subpower.algebra import *
from subpower.circuits import *
from subpower.congruence import *
from subpower.representations import *
from subpower.solvers import *
from subpower.io_util import *
