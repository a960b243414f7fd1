"""Transformer backend for the expio tagging wire protocol.

Fine-tunes a pretrained encoder with a linear token-classification head
and serves train/predict requests as line-delimited JSON on stdio. The
package is deliberately independent of the pipeline that launches it:
the wire protocol is the only contract.
"""

from .alignment import IGNORE_INDEX, align_labels, first_subword_positions
from .errors import WireError
from .model import AdapterHyper, TokenTagger
from .server import AdapterServer, serve

__all__ = [
    "AdapterHyper",
    "AdapterServer",
    "IGNORE_INDEX",
    "TokenTagger",
    "WireError",
    "align_labels",
    "first_subword_positions",
    "serve",
]
