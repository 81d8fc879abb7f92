"""sthl: toolchain for the ScenethesisLang scene-specification language.

Parse and type-check `.sthl` programs, compile their spatial constraints,
solve object layouts with the batched repair solver, resolve assets, and
export engine-importable scene packages.
"""

__version__ = "0.1.0"
