import hypothesis
import pytest

from esconv.model import reference_design

hypothesis.settings.register_profile("fast", max_examples=25)
hypothesis.settings.register_profile("thorough", max_examples=300)


@pytest.fixture(scope="session")
def design():
    return reference_design()
