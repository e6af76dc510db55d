import sys

from rirdenoise.cli import main

sys.exit(main())
