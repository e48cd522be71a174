"""Overlapping mention recognition with mention separators.

Five structured models over the same feature set: two linear-chain
baselines (``lcrf-single``, ``lcrf-multi``), separator labels on gap states
(``state``) or on parallel edges between word states (``edge``), and the
mention hypergraph (``hypergraph``).
"""

__version__ = "0.1.0"

from .corpus import Corpus, Mention, Sentence, Token, read_corpus, write_corpus  # noqa: E402
from .codec import Separator, encode, interpret  # noqa: E402
from .errors import CapacityError, FormatError, InvalidSequenceError, SepmarkError  # noqa: E402
from .networks import SCHEMES, build  # noqa: E402
