import os

import pytest

from otparse.decoder import Decoder
from otparse.fixtures import CATEGORIES
from otparse.grammar import build_grammar, pruned_grammar


def pytest_addoption(parser):
    parser.addoption(
        "--acos-dir", default=os.environ.get("OTPARSE_ACOS_DIR"),
        help="directory with the ACOS rest16/laptop16 {train,dev,test}.tsv files (enables the corpus checks)",
    )


@pytest.fixture(scope="session")
def acos_dir(request):
    return request.config.getoption("--acos-dir")


@pytest.fixture(scope="session")
def grammar():
    return build_grammar(list(CATEGORIES))


@pytest.fixture(scope="session")
def pruned(grammar):
    return pruned_grammar(grammar)


@pytest.fixture(scope="session")
def decoder(pruned):
    return Decoder(pruned)


@pytest.fixture(scope="session")
def tiny_decoder():
    return Decoder(pruned_grammar(build_grammar(["FOOD#QUALITY"])))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
