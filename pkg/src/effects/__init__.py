# Marginal-effects decomposition
from .decomposition import (EffectsDecomposition, decompose, decompose_params, multiplier, spectral_effects,
                            effects_uncertainty, effects_table, METHODS)
