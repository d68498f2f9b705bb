"""
TwoWell Utils - Colors and styling
"""

import sys

import colorama


class Colors:
    """Terminal color codes"""
    CYAN = colorama.Fore.CYAN
    GREEN = colorama.Fore.GREEN
    YELLOW = colorama.Fore.YELLOW
    RED = colorama.Fore.RED
    MAGENTA = colorama.Fore.MAGENTA

    # Styles
    BOLD = colorama.Style.BRIGHT
    DIM = colorama.Style.DIM

    # Reset
    RESET = colorama.Style.RESET_ALL

    @staticmethod
    def disable():
        """Disable colors (non-tty output, NO_COLOR)"""
        Colors.CYAN = ''
        Colors.GREEN = ''
        Colors.YELLOW = ''
        Colors.RED = ''
        Colors.MAGENTA = ''
        Colors.BOLD = ''
        Colors.DIM = ''
        Colors.RESET = ''


# Enable colors on Windows
if sys.platform == 'win32':
    colorama.just_fix_windows_console()


def colored(text, color='', style=''):
    """Apply color and style to text"""
    return f"{style}{color}{text}{Colors.RESET}"


def tag(level: str) -> str:
    """Bracketed status tag, e.g. [ERROR] in red"""
    color = {
        "ERROR": Colors.RED,
        "WARNING": Colors.YELLOW,
        "SUCCESS": Colors.GREEN,
        "INFO": Colors.CYAN,
    }.get(level, '')
    return colored(f"[{level}]", color, Colors.BOLD)
