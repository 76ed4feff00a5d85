import sys
from pathlib import Path

# the enumeration oracle lives next to the tests
sys.path.insert(0, str(Path(__file__).parent))
