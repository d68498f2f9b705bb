"""
TwoWell Utils Package
"""

from .colors import Colors, colored, tag
from .fileops import (
    provenance_lines,
    write_csv,
    read_csv,
    SweepCsv,
    write_report,
    read_report
)

__all__ = [
    'Colors',
    'colored',
    'tag',
    'provenance_lines',
    'write_csv',
    'read_csv',
    'SweepCsv',
    'write_report',
    'read_report'
]
