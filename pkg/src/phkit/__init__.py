"""Digital twin of a pH-reactive material toolkit.

Submodules: chemistry (acid-base equilibria), materials (color/odor/shape
response models), fluidics (diffusion channels), controller (closed-loop
two-reservoir mixing), scene (scenario-driven simulation), calibration
(parameter fitting), cli and service (entry points).
"""

__version__ = "0.1.0"
