"""Secure multi-cell massive MIMO under an active pilot contamination attack.

Modules
-------
numerics
    Hermitian eigendecomposition, PSD square roots, seeded Gaussian draws.
channel
    System configuration, correlation synthesis and channel sampling.
uplink
    Pilots, attack precoder, MMSE estimation and null-space projection.
downlink
    MF, MF-AN, NS and unified transmit designs.
analysis
    Large-array secrecy rates and the closed forms built on them.
montecarlo
    Simulation of the ergodic secrecy rate.
cli
    Command-line experiment driver.
"""

__version__ = "0.1.0"
