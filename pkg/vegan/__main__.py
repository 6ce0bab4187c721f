import sys

from _vegan.cli import main

sys.exit(main())
