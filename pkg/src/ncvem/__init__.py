"""Non-conforming harmonic virtual element method for the 2D Dirichlet-Laplace problem."""
