"""Two-cell cooperative precoding with analog and quantized CSI feedback.

Modules
-------
rmt          scalar fixed points of the large-system analysis
analog       limiting SINRs and power split under analog feedback
digital      limiting SINRs and bit split under RVQ feedback
mcsim        finite-size Monte Carlo simulator
experiments  sweeps and feedback-budget conversions
cli          batch command line
"""

__version__ = "0.1.0"
