import sys

from fracivp.cli import main

sys.exit(main())
