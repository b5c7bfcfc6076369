import logging

import pytest

from support import DATA
from hmmaug.phones import load_g2p_rules, load_phoneset
from hmmaug.textnorm import NormalizationConfig, load_transliteration_table


@pytest.fixture(autouse=True)
def _quiet_lm_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="hmmaug.ngram")


@pytest.fixture(scope="session")
def toy_norm():
    return NormalizationConfig(transliteration=load_transliteration_table(DATA / "translit.tsv"))


@pytest.fixture(scope="session")
def phoneset():
    return load_phoneset(DATA / "phoneset.txt")


@pytest.fixture(scope="session")
def rules():
    return load_g2p_rules(DATA / "g2p.tsv")


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
