from .config import RunConfig
from .constructions import ParamSchedule, build_S_M, build_T_M
from .error import OpIdealError
from .factorization import factor_through_formal_identity
from .fss_probe import corollary_witness, fss_profile, milman_vector
from .rip import gen_family
from .runner import ExperimentRunner, run
from .separation import SeparatingFunctional, separation_experiment
