"""Spectral representation learning for simulator and residual skills."""
from .buffer import FIELDS, InsufficientData, ReplayBuffer
from .estimators import ResidualSkillDiscovery, SpectralFeatures
from .features import (FeaturePair, OuterProductPair, density_loss, discovery_loss, feature_loss,
                       gram_inner, tabular_batch, tabular_matrices)

__all__ = [
    "FIELDS", "FeaturePair", "InsufficientData", "OuterProductPair", "ReplayBuffer", "ResidualSkillDiscovery",
    "SpectralFeatures", "density_loss", "discovery_loss", "feature_loss", "gram_inner",
    "tabular_batch", "tabular_matrices",
]
