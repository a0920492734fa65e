"""maskopt: joint optimization of probabilistic k-space undersampling
patterns and a small residual reconstruction network.

The package is organized around an exact matrix-form Fourier layer
(`fourier`), a probabilistic sampling layer with constrained blue-noise
mask synthesis (`sampling`), a hand-differentiated residual CNN (`recon`),
classical mask families for comparison (`baselines`), synthetic phantom
data (`data`), and the training/evaluation loop tying them together
(`pipeline`).  Hot kernels live in `_kernels` with a compiled extension
and a pure-NumPy fallback.
"""

from ._kernels import BACKEND_NAME
from .baselines import BaselineSpec, baseline_mask
from .core import (ComplexGrid, ProbabilityMatrix, RealImage, SamplingMask,
                   TwoChannelGrid, load_complex, load_image, load_mask,
                   load_probability, log_magnitude_image, rate_of,
                   save_complex, save_image, save_mask, save_pgm,
                   save_probability)
from .data import (AugmentSpec, Dataset, augment_dataset, center_translate,
                   make_phantom_set, normalize, resize, rotate_image,
                   rotate_random, to_kspace)
from .fourier import (center_shift, center_shift_inverse, dft_matrix,
                      forward_2d, ift_backward, inverse_2d)
from .pipeline import (EvalReport, TrainConfig, TrainResult, TrainingDiverged,
                       compare_methods, default_probability, evaluate,
                       export_probability_profile, joint_loss, learning_rate,
                       load_checkpoint, mse, psnr, save_checkpoint, train,
                       undersampled_image)
from .recon import (ActivationTape, AdamState, ReconNet, adam_init, adam_step,
                    euclidean_loss, load_network, save_network)
from .sampling import (ConstraintConfig, RegionReport, apply_mask,
                       density_from_spacing, generate_constrained_mask,
                       mask_backward, merge_channels, project_probabilities,
                       sample_bernoulli, save_region_reports,
                       spacing_from_density, split_channels)

__version__ = "0.1.0"
