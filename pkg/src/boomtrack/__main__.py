import sys

from boomtrack.cli import main

sys.exit(main())
