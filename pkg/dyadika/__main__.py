import sys

from dyadika.cli import main

sys.exit(main())
