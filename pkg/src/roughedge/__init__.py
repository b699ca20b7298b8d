"""Local tomographic reconstruction of rough jump boundaries from discrete Radon data.

Modules
-------
perturbation  boundary perturbation profiles with certified bounds
phantom       base curve, perturbed phantom, evaluation points
kernels       aperture, interpolation, filtered and DTB kernels
sinogram      discrete mollified Radon data and caches
reconstruct   local reconstruction, remainder fields, epsilon sweeps
numtheory     genericity screening, Fourier-mode sums, model integrals
cli           batch front end (``roughedge`` console script)
"""

import warnings

__version__ = "0.1.0"

# numba probes TBB first and warns when the installed version is too old before
# falling back to OpenMP or its own work queue; the fallback is fine here
warnings.filterwarnings("ignore", message="The TBB threading layer requires")
