import sys
from pathlib import Path

# Make `src` importable when running pytest from the repository root
sys.path.insert(0, str(Path(__file__).parent))
