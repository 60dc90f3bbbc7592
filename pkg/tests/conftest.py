import pytest

from circlerenorm import numerics
from circlerenorm import circlemap as cm
from circlerenorm.numerics import ContinuedFraction


@pytest.fixture(autouse=True)
def extended_precision():
    numerics.use_precision("extended")
    yield


def _tuned(spec, target, depth):
    numerics.use_precision("extended")
    model = cm.MapModel.from_spec(spec)
    return cm.tuned_model(model, target, depth)


@pytest.fixture(scope="session")
def golden_cubic():
    """Single cubic unit tuned to the golden mean, depth 14."""
    return _tuned([(3, "0.6")], ContinuedFraction.golden(14), 14)


@pytest.fixture(scope="session")
def golden_bicubic():
    """Bi-cubic model (first twist 0.37) tuned to the golden mean, depth 14."""
    return _tuned([(3, "0.37"), (3, "0.5")], ContinuedFraction.golden(14), 14)


@pytest.fixture(scope="session")
def sqrt2_cubic():
    """Single cubic unit tuned to [2,2,2,...] (sqrt(2)-1), depth 10."""
    return _tuned([(3, "0.4")], ContinuedFraction.constant(2, 10), 10)


@pytest.fixture(scope="session")
def conjugating_diffeo():
    numerics.use_precision("extended")
    return cm.AnalyticDiffeo(((1, "0.05"),))


@pytest.fixture(scope="session")
def golden_bicubic_conjugate(golden_bicubic, conjugating_diffeo):
    return cm.ConjugatedCircleMap(golden_bicubic, conjugating_diffeo)
