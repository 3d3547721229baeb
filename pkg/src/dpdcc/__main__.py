import sys

from dpdcc.cli import main

sys.exit(main())
