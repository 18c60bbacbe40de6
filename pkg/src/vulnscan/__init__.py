"""ML-driven vulnerability scanner for Python source code.

Pipeline: lexer -> word2vec token embeddings -> stacked bidirectional LSTM
per vulnerability type -> windowed detector, wrapped by a scan service, a
CLI, and an optional chat-model adapter for analysis and secure rewriting.
"""

__version__ = "0.1.0"

from .vulntypes import VulnType

__all__ = ["VulnType", "__version__"]
