import sys

from gerbecalc.main import main

sys.exit(main())
