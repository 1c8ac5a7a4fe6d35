# Lets tests import the top-level packages without installing the repo.
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
