"""Resource caps and numeric tolerances.

Caps keep every computation at desk scale: dense operators up to
``DIM_CAP``, string enumerations up to ``STRING_CAP``, combinatorial table
searches up to ``TABLE_CAP`` visited nodes.  The environment variable
``CQWIRETAP_CAP`` overrides the operator dimension cap; an explicit
function argument overrides both.
"""

import os

# operator dimension for any materialized matrix (kron products included)
DIM_CAP = 4096
# enumerated strings |X|^n (typical sets, exhaustive error sums)
STRING_CAP = 10**6
# visited nodes in exhaustive BRI table search
TABLE_CAP = 10**7

ENV_CAP = "CQWIRETAP_CAP"

TOL_HERM = 1e-10
TOL_TRACE = 1e-10
EIG_FLOOR = -1e-10
TOL_SUBPOVM = 1e-9
SUPPORT_RTOL = 1e-12
TOL_ROWSUM = 1e-12
TOL_BOUND = 1e-9


def dim_cap(override: int | None = None) -> int:
    """Effective operator dimension cap.

    Precedence: explicit ``override`` argument, then the ``CQWIRETAP_CAP``
    environment variable, then :data:`DIM_CAP`.
    """
    if override is not None:
        return int(override)
    env = os.environ.get(ENV_CAP)
    if env is not None:
        return int(env)
    return DIM_CAP


def check_dim(dim: int, override: int | None = None) -> int:
    """Validate a materialized operator dimension against the cap."""
    from .errors import ResourceCapError

    cap = dim_cap(override)
    if dim > cap:
        raise ResourceCapError(
            f"operator dimension {dim} exceeds cap {cap}",
            requested=dim,
            cap=cap,
        )
    return dim
