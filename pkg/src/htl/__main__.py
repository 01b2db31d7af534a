import sys

from htl.cli import main

sys.exit(main())
