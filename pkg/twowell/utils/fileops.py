"""
TwoWell Utils - File Operations Helpers
CSV tables with provenance headers and key=value reports
"""

import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

# Shared with twowell.core.logger; fetched by name so utils stays import-free of core
log = logging.getLogger("twowell")


def provenance_lines(entries: Dict[str, object]) -> List[str]:
    """Render provenance entries as '# key=value' comment lines"""
    return [f"# {key}={value}" for key, value in entries.items()]


def write_csv(filepath, fields: Sequence[str], rows: Iterable[Sequence[str]],
              provenance: Sequence[str] = ()) -> Tuple[bool, str]:
    """
    Write a CSV table preceded by '#' provenance lines
    Returns (success, message)
    """
    try:
        path = Path(filepath)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as f:
            for line in provenance:
                f.write(line + "\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(fields)
            writer.writerows(rows)
        return True, f"Written to {filepath}"
    except OSError as e:
        return False, f"Error writing {filepath}: {e}"


def read_csv(filepath) -> Tuple[List[str], List[str], List[List[str]]]:
    """Split a provenance CSV into (comment lines, header, rows)"""
    comments, body = [], []
    with open(filepath, newline='', encoding='utf-8') as f:
        for line in f:
            if line.startswith("#"):
                comments.append(line.rstrip("\n"))
            elif line.strip():
                body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        return comments, [], []
    return comments, rows[0], rows[1:]


class SweepCsv:
    """Append-only CSV that can resume when its provenance matches"""

    def __init__(self, filepath, fields: Sequence[str], provenance: Sequence[str] = ()):
        self.path = Path(filepath)
        self.fields = list(fields)
        self.provenance = list(provenance)
        self._ready = False

    def _start_fresh(self):
        ok, msg = write_csv(self.path, self.fields, [], self.provenance)
        if not ok:
            raise OSError(msg)
        self._ready = True

    def resume(self) -> List[List[str]]:
        """Rows already on disk, or [] after starting a fresh file"""
        if self.path.exists():
            comments, header, rows = read_csv(self.path)
            if comments == self.provenance and header == self.fields:
                complete = [r for r in rows if len(r) == len(self.fields)]
                self._ready = True
                return complete
            log.warning(f"{self.path}: provenance differs, starting a fresh sweep file")
        self._start_fresh()
        return []

    def append(self, rows: Iterable[Sequence[str]]):
        """Append rows and flush them to disk"""
        if not self._ready:
            self._start_fresh()
        with open(self.path, 'a', newline='', encoding='utf-8') as f:
            csv.writer(f, lineterminator="\n").writerows(rows)
            f.flush()


def write_report(filepath, lines: Sequence[str]) -> Tuple[bool, str]:
    """
    Write line-oriented key=value text
    Returns (success, message)
    """
    try:
        path = Path(filepath)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(line + "\n" for line in lines), encoding='utf-8')
        return True, f"Written to {filepath}"
    except OSError as e:
        return False, f"Error writing {filepath}: {e}"


def read_report(filepath) -> Dict[str, str]:
    """Parse key=value text, skipping blanks and '#' comments"""
    entries = {}
    for line in Path(filepath).read_text(encoding='utf-8').splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries
