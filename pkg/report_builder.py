# Copyright 2019 getcarrier.io

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import csv
import logging
from os import path
from typing import Any, Dict, List, Optional, Sequence

import markdown
from jinja2 import Environment, FileSystemLoader

logger = logging.getLogger(__name__)

TEMPLATES_DIR = path.join(path.dirname(path.abspath(__file__)), "templates")

# columns right-aligned in console tables
NUMERIC_COLUMNS = {"h", "nu", "rho", "k_eff", "prediction", "deviation", "expected", "wall_time", "seed",
                   "omega", "alpha", "sigma", "omega_j", "mu", "resolution", "evaluations",
                   "iterations", "relative_defect", "error", "rate"}


def markdown_to_html(text: str) -> str:
    """
    Convert a markdown summary to an HTML fragment.

    Args:
        text: Markdown-formatted string

    Returns:
        HTML string, empty string if text is None
    """
    if not text:
        return ""
    return markdown.markdown(text, extensions=['tables', 'sane_lists'], output_format='html5')


def pad(text, width: int, align: str = "left") -> str:
    text = "" if text is None else str(text)
    return text.rjust(width) if align == "right" else text.ljust(width)


class ReportBuilder(object):
    """
    Renders result rows as CSV, aligned console tables and an optional HTML summary.

    Rows are any objects with ``to_record(include_wall_time)`` returning a
    dict of strings (``results.ResultRow``, ``LfaRow``, ``CriterionResult``).
    """

    def __init__(self, templates_dir: str = TEMPLATES_DIR, logger=None):
        self.logger = logger or logging.getLogger(__name__)
        self.env = Environment(loader=FileSystemLoader(templates_dir), keep_trailing_newline=True)
        self.env.filters['pad'] = pad

    @staticmethod
    def records(rows: Sequence[Any], include_wall_time: bool = True) -> List[Dict[str, str]]:
        return [row.to_record(include_wall_time) for row in rows]

    def write_csv(self, rows: Sequence[Any], columns: Sequence[str], out: str,
                  include_wall_time: bool = True) -> str:
        """Header row first, then one line per row; RFC 4180 quoting and CRLF line ends."""
        with open(out, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=list(columns), quoting=csv.QUOTE_MINIMAL,
                                    lineterminator="\r\n", extrasaction="ignore")
            writer.writeheader()
            for record in self.records(rows, include_wall_time):
                writer.writerow(record)
        self.logger.info(f"[ReportBuilder] wrote {len(rows)} rows to {out}")
        return out

    def console_table(self, title: str, rows: Sequence[Any], columns: Sequence[str],
                      footer: Optional[str] = None) -> str:
        records = self.records(rows)
        widths = {column: max([len(column)] + [len(record.get(column, "")) for record in records])
                  for column in columns}

        def cells(values):
            return [{"text": values.get(column, ""), "width": widths[column],
                     "align": "right" if column in NUMERIC_COLUMNS else "left"} for column in columns]

        header = [{"text": column, "width": widths[column], "align": "left"} for column in columns]
        rule = "-" * (sum(widths.values()) + 2 * (len(columns) - 1))
        template = self.env.get_template("console_table.txt")
        return template.render(title=title, header=header, rule=rule,
                               rows=[cells(record) for record in records], footer=footer)

    def summary_markdown(self, title: str, description: str, sections: List[Dict[str, Any]]) -> str:
        """
        Args:
            sections: dicts with ``title``, ``rows`` (result objects), ``columns``
                and an optional ``note``
        """
        prepared = []
        for section in sections:
            columns = list(section["columns"])
            prepared.append({
                "title": section["title"],
                "labels": columns,
                "columns": columns,
                "rows": self.records(section["rows"]),
                "note": section.get("note"),
            })
        template = self.env.get_template("summary.md")
        return template.render(title=title, description=description, sections=prepared)

    def write_html(self, title: str, markdown_text: str, out: str) -> str:
        template = self.env.get_template("report.html")
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(template.render(title=title, body=markdown_to_html(markdown_text)))
        self.logger.info(f"[ReportBuilder] wrote HTML summary to {out}")
        return out
