"""Allow ``python -m steklov_limits``."""

from .main import main

main()
