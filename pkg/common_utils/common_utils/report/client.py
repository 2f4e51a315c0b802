# common_utils/report/client.py
import pathlib
from typing import Any, Dict, Optional, Union

from jinja2 import Environment, FileSystemLoader, StrictUndefined, TemplateNotFound

from common_utils.logger.client import LoggerClient

logger = LoggerClient("report")


class ReportClient:
    """
    Renders plain-text reports from jinja2 templates.
    Each component keeps its templates in its own directory; templates are
    addressed by id (file name without the .txt suffix).
    """
    def __init__(self, template_dir: Union[str, pathlib.Path]):
        self.template_dir = pathlib.Path(template_dir)
        self.env = Environment(
            loader=FileSystemLoader(str(self.template_dir)),
            undefined=StrictUndefined,
            keep_trailing_newline=True,
            trim_blocks=True,
            lstrip_blocks=True,
        )
        self.env.filters["db"] = format_db

    def render(self, template_id: str, template_data: Dict[str, Any]) -> str:
        """Render a template and return the text"""
        try:
            template = self.env.get_template(f"{template_id}.txt")
        except TemplateNotFound:
            logger.error("Template not found", {"template_id": template_id, "dir": str(self.template_dir)})
            raise
        return template.render(**template_data)

    def write(self, template_id: str, template_data: Dict[str, Any], destination: Union[str, pathlib.Path]) -> pathlib.Path:
        destination = pathlib.Path(destination)
        destination.parent.mkdir(parents=True, exist_ok=True)
        destination.write_text(self.render(template_id, template_data), encoding="utf-8")
        logger.debug("Report written", {"template_id": template_id, "path": str(destination)})
        return destination


def format_db(value: Optional[float], digits: int = 2) -> str:
    """Format a dB quantity with an explicit sign; None renders as n/a"""
    if value is None:
        return "n/a"
    return f"{value:+.{digits}f} dB"
