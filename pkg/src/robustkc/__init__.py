"""Robust kernel clustering with outlier detection.

Denoise a Gaussian kernel matrix by LP rounding or an SDP relaxation,
cluster by spectral embedding + k-means, and flag low-degree points as
outliers.
"""

from .core import OUTLIER, UNLABELED, DataMatrix, DenoisedMatrix, KernelMatrix, ClusterResult, MixtureSpec
from .kernel import ParamConfig, gaussian_kernel, select_gamma, select_theta
from .denoise import AdmmConfig, lp_denoise, sdp_denoise
from .spectral import KMeansConfig, cluster, embed, kmeans
from .outlier import OutlierConfig, degrees, split_outliers
from .dimred import fit_projection, project
from .modelselect import estimate_r
from .metrics import evaluate
from .pipeline import AUTO, DimRedConfig, PipelineConfig, run

__version__ = "0.1.0"
