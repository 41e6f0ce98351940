import sys

from src.app.main import main

sys.exit(main())
