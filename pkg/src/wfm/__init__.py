"""Wavelet flow matching for multi-modality volumetric image synthesis.

A single class- and time-conditioned velocity network, trained over 3D Haar
wavelet coefficients, transports the mean of the available modalities toward
the missing one in one or two ODE steps.  Everything numerical (wavelets,
autodiff, optimizer, solvers, metrics, PRNG) is implemented in this package
on top of numpy, with numba kernels for the 3D convolutions.

Submodules:
    volume    dense 3D volumes, masks, normalization, padding, slice export
    nifti     minimal NIfTI-1 reader/writer plus a raw volume format
    wavelet   single-level 3D Haar analysis/synthesis (8 subbands)
    rng       splitmix64 / xoshiro256++ / Box-Muller deterministic PRNG
    tensorad  tape-based reverse-mode autodiff, AdamW, gradient clipping
    model     conditioned 3D U-Net velocity field and checkpoints
    flow      informed-prior flow matching math and the training loop
    solver    Euler/Heun ODE integration and end-to-end synthesis
    metrics   masked PSNR and SSIM
    phantom   deterministic synthetic multi-modality volume generator
    cli       command-line surface (gen-phantom, train, synthesize, ...)
"""

from .volume import Volume, Mask, ModalityId

__version__ = "0.1.0"

__all__ = ["Volume", "Mask", "ModalityId", "__version__"]
