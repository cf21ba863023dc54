import pathlib

import pytest

from mpst.core import NodeStore
from mpst.parser import parse_global, parse_process, parse_session

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"


class Corpus:
    """Lazily parsed corpus files, all interned in one shared store.

    Stores are append-only, so sharing one across the whole test session is
    safe and makes identity assertions (`is`) meaningful between tests.
    """

    def __init__(self):
        self.store = NodeStore()
        self._cache = {}

    def path(self, name):
        return CORPUS / name

    def text(self, name):
        return (CORPUS / name).read_text()

    def _load(self, name, parse):
        if name not in self._cache:
            self._cache[name] = parse(self.text(name), store=self.store,
                                      filename=name)
        return self._cache[name]

    def proc(self, name):
        return self._load(name, parse_process)

    def gt(self, name):
        return self._load(name, parse_global)

    def sess(self, name):
        return self._load(name, parse_session)

    def names(self, suffix):
        return sorted(p.name for p in CORPUS.glob("*" + suffix))


@pytest.fixture(scope="session")
def cx():
    return Corpus()


@pytest.fixture()
def store():
    return NodeStore()
