"""Involutive jet computations for Lie pseudo-group normal forms.

Modules: ``multiindex`` (multi-indices and class orderings), ``series``
(exact truncated power series), ``jetcalc`` (jet coordinates and total
derivatives), ``system`` (symbols, Cartan characters, involutivity),
``reduction`` (reduced determining equations), ``normalform`` (normal-form
determining equations, cross-sections, moving frames), ``chains``
(chain ODEs) and ``catalog`` (worked examples with golden values).
"""
__version__ = "0.1.0"
