"""Equivalence-preserving resynthesis: AIG passes, technology mapping and recipes."""
from .recipes import (RecipeConfig, SynthesisRecipe, VariantSet, compute_dcp, diversity_report,
                      enumerate_recipes, generate_variants, prune_redundant_recipes, resynthesize)

__all__ = ["RecipeConfig", "SynthesisRecipe", "VariantSet", "compute_dcp", "diversity_report",
           "enumerate_recipes", "generate_variants", "prune_redundant_recipes", "resynthesize"]
