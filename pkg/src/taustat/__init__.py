"""Tau-statistic inference for spatiotemporal clustering of case line-lists.

Typical use: test for clustering with :func:`envelope_test`, then estimate
the clustering endpoint and its interval with :func:`estimate_range`.
"""
__version__ = "0.1.0"

from .core import *  # noqa: F401,F403
from .errors import *  # noqa: F401,F403
from .pairwise import *  # noqa: F401,F403
from .tau import *  # noqa: F401,F403
from .nulltest import *  # noqa: F401,F403
from .bootstrap import *  # noqa: F401,F403
from .intervals import *  # noqa: F401,F403
from .io import ingest_csv, write_case_csv  # noqa: F401
