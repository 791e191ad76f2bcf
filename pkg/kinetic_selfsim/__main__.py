import sys

from kinetic_selfsim.cli import main

if __name__ == "__main__":
    sys.exit(main())
