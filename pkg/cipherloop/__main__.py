import sys

from cipherloop.main import main

sys.exit(main())
