import sys
import os

# ✅ Add root directory to sys.path
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

# ✅ Run the matchmaking CLI
from backend.cli import main

if __name__ == "__main__":
    sys.exit(main())
