"""Centro-affine invariants of smooth convex bodies."""
