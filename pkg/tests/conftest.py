import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from toxlogic import toxkb


LISTING_PRIOR = """
0.10::salivation(X,decreased);
0.10::salivation(X,increased);
0.80::salivation(X,usual).
"""

LISTING_LINKING = """
4*P::hasToxidrome(X,sympathomimetic);
P::hasToxidrome(X,serotonergic) :-
mentalStatus(X,agitated), P is 0.2.
"""

LISTING_GOAL = """
hasToxidrome(X,cholinergic) :-
salivation(X, increased),
urination(X, increased),
pupilDiameter(X,small).
"""


@pytest.fixture(scope="session")
def kb():
    return toxkb.load_kb()
