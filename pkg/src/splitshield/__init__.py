"""Split inference with privacy-protected feature-map offloading.

Subpackages and modules:

* engine   — chain-CNN forward/gradient engine (compiled kernels + fallback)
* latency  — transmission/compute latency model and partition planning
* privacy  — clipping, rank-calibrated Laplace noise, budget accounting
* attacks  — white-box (WRA) and black-box (BINA) reconstruction attacks
* metrics  — MSE / SSIM / PSNR fidelity scoring
* harness  — scenario runner, report emitter and the command-line interface
"""

__version__ = "0.1.0"
