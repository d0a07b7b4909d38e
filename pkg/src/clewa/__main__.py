import sys

from clewa.harness.cli import main

sys.exit(main())
