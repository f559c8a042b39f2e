"""Compound divergence and train/test split generators."""

from nqg.splits.compounds import (ALPHA, CompoundProfile, Extractor, chernoff, compound_divergence,
                                  divergence, extract_atoms, extract_compounds, normalize, profile)
from nqg.splits.funql import FunqlError, Tree, parse_bracketed, parse_funql
from nqg.splits.generate import (SplitError, SplitResult, default_anonymizer, length_split,
                                 missing_atom_fraction, random_split, template_split, tmcd_split)
