import sys

from cmdnls.cli import main

sys.exit(main())
