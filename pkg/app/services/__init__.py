"""Numerical modules: span algebra, triples, suspension, forms, FGR functionals, harness."""
