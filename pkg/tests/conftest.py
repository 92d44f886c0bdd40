from __future__ import annotations

import numpy as np
import pytest

from ler.corpus import Corpus

from helpers import make_doc


@pytest.fixture
def small_corpus() -> Corpus:
    docs = (
        make_doc("a", "Acme Corp pays $5,000 on 3 March 2021.",
                 spans=[(0, 2, "PARTY"), (3, 5, "MONEY"), (6, 9, "DATE")]),
        make_doc("b", "Under Section 4.2, Beta Holdings shall comply.",
                 spans=[(1, 3, "PROVISION"), (4, 6, "PARTY")]),
        make_doc("c", "Payment of $750 due 12 January 2020 per Article 9.",
                 spans=[(2, 4, "MONEY"), (5, 8, "DATE"), (9, 11, "PROVISION")]),
    )
    return Corpus(docs)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)
