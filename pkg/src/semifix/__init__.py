"""Fixed points and fractals in semimetric spaces with certified error bounds."""

from .extreal import INF, ExtRealError
from .fixpoint import (
    ContractionMap,
    ErrorBounds,
    IterationTrace,
    StoppingRule,
    certify_contraction,
    error_bounds,
    make_psi,
    picard_iterate,
    psi,
)
from .hutchinson import (
    IFS,
    DivergentRunError,
    FractalRun,
    FractalStop,
    generate_fractal,
    hutchinson_step,
    invariance_residual,
    stability_run,
)
from .raster import render_pgm
from .semimetric import (
    ComparisonFunction,
    DomainError,
    SemimetricKind,
    SemimetricSpace,
    TriangleFunction,
    ball_members,
    basic_triangle_function,
    diameter,
    distance,
    regularity_probe,
    validate_axioms,
)
from .sets import (
    NetCertificate,
    PointSet,
    coarsen,
    directed_distance,
    epsilon_net,
    hausdorff_distance,
    union,
)

__version__ = "0.1.0"
