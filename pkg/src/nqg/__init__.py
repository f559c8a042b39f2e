"""Grammar induction, latent-derivation parsing and compositional splits."""

__version__ = "0.1.0"
