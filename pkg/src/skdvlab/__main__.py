"""Allow ``python -m skdvlab`` as an alias for the ``skdvlab`` script."""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
