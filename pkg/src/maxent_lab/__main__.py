import sys

from maxent_lab.cli import main

sys.exit(main())
