import sys

from bkappa.cli import main

sys.exit(main())
