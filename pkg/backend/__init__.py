from pathlib import Path

# Base directory for the backend package
BASE_DIR = Path(__file__).resolve().parent

# Shipped knowledge packs
DATA_DIR = BASE_DIR / "data"
QOS_DATA_DIR = DATA_DIR / "qos"

__all__ = [
    "BASE_DIR",
    "DATA_DIR",
    "QOS_DATA_DIR",
]
