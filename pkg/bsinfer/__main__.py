import sys

from bsinfer.cli import main

sys.exit(main())
