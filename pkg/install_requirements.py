"""
Script to install required dependencies for the Cascade Node simulator
"""

import subprocess
import sys
from pathlib import Path


def read_requirements():
    """Package pins from requirements.txt next to this script"""
    path = Path(__file__).parent / "requirements.txt"
    return [line.strip() for line in path.read_text().splitlines() if line.strip() and not line.startswith("#")]


def install_requirements():
    """Install all required packages"""
    print("📦 Installing required packages...")

    failed = []
    for package in read_requirements():
        try:
            print(f"Installing {package}...")
            subprocess.check_call([sys.executable, "-m", "pip", "install", package])
            print(f"✅ {package} installed successfully")
        except subprocess.CalledProcessError as e:
            print(f"❌ Failed to install {package}: {e}")
            failed.append(package)

    if failed:
        print(f"\n⚠️ Some packages failed: {', '.join(failed)}")
        return 1
    print("\n🎉 All packages installed!")
    print("🚀 Try it with: python main.py transfer --outdir out")
    return 0


if __name__ == "__main__":
    sys.exit(install_requirements())
