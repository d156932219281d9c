"""Key-rate analysis and simulation for amplified-line QKD with loss control.

Subpackage map:

* ``channels``: loss/amplifier algebra, line geometry, photon statistics.
* ``numerics``: log-domain special functions and guarded quadrature.
* ``rates``: post-selected mutual information and key-rate assembly.
* ``photon_encoding`` / ``phase_encoding``: the two measurement schemes.
* ``eavesdrop``: interception diagnostics and natural-loss collection bounds.
* ``protocol``: Monte-Carlo protocol rounds and privacy amplification.
* ``optimizer``: encoding-parameter search, leakage sweeps, worst-case tap.
* ``cli``: command-line entry points.
"""

__version__ = "0.1.0"
