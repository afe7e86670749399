"""Build the default measure, verify it, and print the verdict.

Usage: python3 scripts/run_pipeline.py [OUT_DIR]
"""

import sys

from crystalmeasure.cli import main

out = sys.argv[1] if len(sys.argv) > 1 else "out"
rc = main(["build", "--out", out])
if rc == 0:
    rc = main(["verify", "--measure", f"{out}/measure.json"])
sys.exit(rc)
