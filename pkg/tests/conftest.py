from pathlib import Path

import pytest

from services.heuristics import SearchBudget
from services.refsynth_service import RefsynthService
from utils.config import Settings
from utils.specs import SpecLoader

ROOT = Path(__file__).parent.parent
CORPUS = ROOT / "corpus"

IMPORT_SHADOWS = """
var x = 42
mod A { var x = 0 }
mod B {
  import A::*
  var y = x
}
"""

LOCAL_OR_QUALIFIED = "mod A { var x = [[y#1]] var y = 1 }"

FORWARD_REF = "mod A { var x = y var y = 1 }"

LOCKED_IMPORT = """
mod A { var x = 1 }
mod B {
  import [[A#1]]::*
  var y = [[x#1]]
}
"""

RECMOD = """
mod P {
  mod A {
    import Q::*
    var x = 1
    var y = [[x#1]]
  }
}
mod Q {
  mod B {
    import P::*
  }
}
"""


@pytest.fixture(scope="session")
def loader():
    return SpecLoader()


@pytest.fixture(scope="session")
def lm_spec(loader):
    return loader.load("lm")


@pytest.fixture(scope="session")
def recmod_spec(loader):
    return loader.load("recmod")


@pytest.fixture
def service(loader):
    return RefsynthService(Settings(), loader)


def wide_budget(max_depth: int = 8, max_solutions: int = 10) -> SearchBudget:
    """Budget that keeps searching after the first solution of each hole."""
    return SearchBudget(wall_clock_ms=120_000, max_solutions_per_hole=max_solutions, max_depth=max_depth)
