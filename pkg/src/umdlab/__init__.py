"""Numerical laboratory for UMD_p^A martingale-transform constants.

Lower bounds come from optimised Paley-Walsh trees and FFT multiplier
norms; grid Bellman functions give threshold estimates."""

__version__ = "0.1.0"
