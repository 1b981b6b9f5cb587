#!/usr/bin/env python3
"""Theory-vs-simulation campaigns (fig4-mini, fig5-mini) and the analytic fig7 sweep.

Thin wrapper over ``qbdmanet validate``; defaults are the desk-scale settings
(10 replications x 2e6 slots per point), which take roughly 20 minutes per
campaign on one core. Use --workers to spread replications over processes.
"""

import sys

from qbdmanet.cli import main

if __name__ == "__main__":
    argv = sys.argv[1:] or ["--campaign", "fig4-mini", "fig5-mini", "fig7-sweep"]
    sys.exit(main(["validate", *argv]))
