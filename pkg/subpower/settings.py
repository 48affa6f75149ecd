import os
from subpower.logger import getSubpowerLogger

__all__ = ["arityCap", "closureCap", "closureWorkCap", "identityCap",
           "oracleCap", "oracleWorkCap", "subuniverseCap", "termSearchCap", "set_defaults",
           "load_environment"]

# largest operation arity accepted in a signature
arityCapDefVal = 8
arityCap = arityCapDefVal
# elements a single subalgebra closure may produce
closureCapDefVal = 10**7
closureCap = closureCapDefVal
# argument combinations a single closure may evaluate
closureWorkCapDefVal = 2 * 10**8
closureWorkCap = closureWorkCapDefVal
# assignments a single identity check may enumerate
identityCapDefVal = 10**6
identityCap = identityCapDefVal
# elements the fork-witness oracle may visit across one compact-rep build
oracleCapDefVal = 10**6
oracleCap = oracleCapDefVal
# argument combinations the fork-witness oracle walk may evaluate
oracleWorkCapDefVal = 2 * 10**8
oracleWorkCap = oracleWorkCapDefVal
# subuniverses enumerated by the similarity and HS searches
subuniverseCapDefVal = 10**5
subuniverseCap = subuniverseCapDefVal
# elements of the function power explored by term searches
termSearchCapDefVal = 10**6
termSearchCap = termSearchCapDefVal

_ENV = {
    'SUBPOWER_ARITY_CAP': 'arityCap',
    'SUBPOWER_CLOSURE_CAP': 'closureCap',
    'SUBPOWER_CLOSURE_WORK_CAP': 'closureWorkCap',
    'SUBPOWER_IDENTITY_CAP': 'identityCap',
    'SUBPOWER_ORACLE_CAP': 'oracleCap',
    'SUBPOWER_ORACLE_WORK_CAP': 'oracleWorkCap',
    'SUBPOWER_SUBUNIVERSE_CAP': 'subuniverseCap',
    'SUBPOWER_TERM_SEARCH_CAP': 'termSearchCap',
}

logger = getSubpowerLogger(name='settings')

def set_defaults() -> None:
    """
    Resets every cap to its default value

    Returns
    -------
    None
    """
    global arityCap, closureCap, closureWorkCap, identityCap, oracleCap, \
           oracleWorkCap, subuniverseCap, termSearchCap
    arityCap = arityCapDefVal
    closureCap = closureCapDefVal
    closureWorkCap = closureWorkCapDefVal
    identityCap = identityCapDefVal
    oracleCap = oracleCapDefVal
    oracleWorkCap = oracleWorkCapDefVal
    subuniverseCap = subuniverseCapDefVal
    termSearchCap = termSearchCapDefVal

def load_environment() -> None:
    """
    Overrides caps from SUBPOWER_* environment variables

    Raises
    ------
    ValueError
        Raised if a variable is set to something other than a positive integer
    """
    for var, name in _ENV.items():
        value = os.getenv(var)
        if value is None:
            continue
        try:
            parsed = int(value)
        except ValueError:
            raise ValueError('{} must be an integer, got {}'.format(var, value))
        if parsed <= 0:
            raise ValueError('{} must be positive, got {}'.format(var, parsed))
        globals()[name] = parsed
        logger.debug('{} set to {} from {}'.format(name, parsed, var))

load_environment()
