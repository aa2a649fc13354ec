"""Terminal interaction: colouring of report lines and the bundled scenario picker.

.. code-block:: python

    from plox.lagrange import interaction
"""

from typing import cast

from pick import pick

_reset = "\x1b[0m"


def green(msg: str) -> str:
    """Wrap an input string so that is is printed with green coloring escape codes."""
    green = "\x1b[32;20m"
    return f"{green}{msg}{_reset}"


def red(msg: str) -> str:
    """Wrap an input string so that is is printed with red coloring escape codes."""
    red = "\x1b[31;20m"
    return f"{red}{msg}{_reset}"


def status(passed: bool, colour: bool = True) -> str:
    """``PASS``/``FAIL`` label, coloured for terminals."""
    label = "PASS" if passed else "FAIL"
    if not colour:
        return label
    return green(label) if passed else red(label)


def single_choice_menu(choices: list[str], prompt: str, indicator: str = "=>") -> str:
    """Prompt the user with a visual menu and return the single item they choose.

    Example:

        >>> single_choice_menu(["free_particle", "pendulum"], "Pick a scenario")
        #  < spawns interactive terminal menu, selected pendulum >
        'pendulum'

    Args:
        choices: The list of options to choose from.
        prompt: The prompt to display above the choices in the menu.
        indicator: Indicator icon on left hand side of current selection.
    """
    selected, _ = pick(  # pyright: ignore
        choices,
        prompt,
        indicator=indicator,
    )
    return cast(str, selected)
