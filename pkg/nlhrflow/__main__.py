import sys

from nlhrflow.cli import main

sys.exit(main())
