"""AU-guided vision-language training for micro-expression recognition,
self-contained at desk scale: autodiff numerics, prompt pipeline,
region-mix augmentation, LOSO evaluation, and a synthetic clip generator."""

__version__ = "0.1.0"
