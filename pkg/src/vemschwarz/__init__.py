"""Virtual element discretization and two-level Schwarz solvers on polyhedral meshes."""
