"""sparsenet - sparse network models for small-n large-p data.

Sparse correlations, cross-correlations, partial correlations and
graphical-LASSO networks, together with the graph filtrations they induce
over the sparsity parameter.
"""

__version__ = "0.1.0"
