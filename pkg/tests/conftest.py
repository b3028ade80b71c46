import pytest

from statepin.crypto_core import ChainSecret, account, keccak256
from statepin.registry import PinRegistry, RegistryConfig, VotingConfig

ADMIN = account(0xAD01)
ALICE, BOB, CAROL = account(0xA1), account(0xB1), account(0xC1)
OUTSIDER = account(0xEE)
PBI_A = keccak256(b"pbi/a")
PBI_B = keccak256(b"pbi/b")
SECRET_A = ChainSecret(keccak256(b"secret/a"))
SECRET_B = ChainSecret(keccak256(b"secret/b"))

# filled by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def make_registry(voting=7, dispute=16, members=(ALICE, BOB, CAROL), masked=(),
                  algorithm="majority") -> PinRegistry:
    reg = PinRegistry.deploy(RegistryConfig(VotingConfig(algorithm, voting), dispute), [ADMIN])
    reg.add_sidechain(ADMIN, PBI_A, VotingConfig(algorithm, voting), list(members), list(masked))
    return reg


@pytest.fixture
def registry():
    return make_registry()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
