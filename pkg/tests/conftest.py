import sys
from pathlib import Path

# Make test-local helper modules (qp_reference) importable.
sys.path.insert(0, str(Path(__file__).parent))
