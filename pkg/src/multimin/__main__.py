from multimin.cli import main
import sys

sys.exit(main())
