"""amgcoarsen: learned coarse/fine grid selection for algebraic multigrid.

Subpackage map:
    sparse     CSR matrix and graph primitives (compiled kernels underneath)
    problems   discretized Poisson operators, mesh generation and ingestion
    env        the sequential coarsening environment
    greedy     diagonal-dominance-ratio greedy baseline
    lloyd      bounded-size graph decomposition
    tagcn      polynomial-filter graph network with dueling heads
    dqn        double-DQN training loop over random meshes
    evaluate   subdomain-batched linear-time coarsening at inference
    twogrid    two-level multigrid solver and convergence measurement
    metrics    F-fraction, effective convergence factor, structured bound
    cli        command-line entry points
"""

from .backend import available_backends, backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "available_backends", "__version__"]
