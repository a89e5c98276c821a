import os
import sys

# namespace packages under packages/ import from the repo root
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
