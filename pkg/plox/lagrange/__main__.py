"""``python -m plox.lagrange``: same as the ``plox-lagrange`` command."""

from plox.lagrange.cli import main

raise SystemExit(main())
