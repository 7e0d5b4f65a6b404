import sys

from sclkit.main import main

sys.exit(main())
