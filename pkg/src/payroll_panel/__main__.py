import sys

from payroll_panel.cli import main

sys.exit(main())
