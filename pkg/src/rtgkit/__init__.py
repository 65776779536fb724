"""Regular tree grammars, affine-context decomposition and typed λ-term grammars."""

import sys

# Recursive helpers walk trees a few thousand nodes deep.
if sys.getrecursionlimit() < 20000:
    sys.setrecursionlimit(20000)

__version__ = "0.1.0"
