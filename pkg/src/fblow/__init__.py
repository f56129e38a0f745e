"""F-blowup toolkit: exact commutative algebra over prime fields.

Subpackages:
  ffpoly    -- field elements, monomials, sparse polynomials, text parser
  groebner  -- Groebner bases, elimination, dimension, Jacobians
  modpres   -- quotient rings, module presentations, signatures
  frobenius -- Frobenius pushforward matrices
  blowup    -- Villamayor ideals, Rees algebras, charts, smoothness
  cli       -- command line interface and fixture catalog
"""

__version__ = "0.1.0"
