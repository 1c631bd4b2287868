"""qlam: a linearly typed quantum lambda calculus.

Parser, linear type checker, probabilistic QRAM-style abstract machine, and a
truncated denotational semantics in a category of webbed superoperator
families, with an adequacy cross-validation harness.
"""

__version__ = "0.1.0"
