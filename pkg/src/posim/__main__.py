"""Allow ``python -m posim`` to behave like the console script."""

import sys

from posim.cli import main

if __name__ == "__main__":
    sys.exit(main())
