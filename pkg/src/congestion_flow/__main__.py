import sys

from congestion_flow.cli import main

sys.exit(main())
