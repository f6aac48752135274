import sys

from grpsim.cli import main

sys.exit(main())
