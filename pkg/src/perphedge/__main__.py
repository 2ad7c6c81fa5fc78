import sys

from perphedge.cli import main

sys.exit(main())
