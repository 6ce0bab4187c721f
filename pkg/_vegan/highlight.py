import functools
import logging

from pygments.formatters import Terminal256Formatter
from pygments.styles import get_all_styles, get_style_by_name
from pygments.token import Token, _TokenType
from pygments.util import ClassNotFound

LEVEL_TOKENS: dict[int, _TokenType] = {
    logging.DEBUG: Token.Comment.Single,
    logging.INFO: Token.Name.Function,
    logging.WARNING: Token.Keyword,
    logging.ERROR: Token.Generic.Error,
    logging.CRITICAL: Token.Generic.Error,
}


@functools.cache
def validate_style(style: str) -> None:
    try:
        get_style_by_name(style)
    except ClassNotFound:
        styles = sorted(get_all_styles())
        raise ValueError(f"Unknown style {style!r}. Please, choose one of {styles}.") from None


@functools.cache
def _escapes(style: str, token: _TokenType) -> tuple[str, str]:
    formatter = Terminal256Formatter(style=style, noitalic=True, nobold=True, nounderline=True)
    return formatter.style_string[str(token)]


def highlight_text(text: str, style: str, token: _TokenType = Token.Comment.Single) -> str:
    on, off = _escapes(style, token)
    return on + text + off


def highlight_level(text: str, style: str, levelno: int) -> str:
    """Color `text` with the token assigned to the nearest standard level at or below `levelno`."""
    known = [level for level in LEVEL_TOKENS if level <= levelno]
    token = LEVEL_TOKENS[max(known)] if known else Token.Comment.Single
    return highlight_text(text, style, token)
