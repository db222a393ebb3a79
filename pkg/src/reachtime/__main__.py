import sys

from reachtime.cli import main

sys.exit(main())
