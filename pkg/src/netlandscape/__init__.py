"""Topological comparison of network populations through latent space embeddings.

Graphs are embedded with a distance latent space model, the embeddings are
summarised by Vietoris-Rips persistence landscapes, and populations of
landscapes are compared with energy statistics and clustered.
"""

__version__ = "0.1.0"
