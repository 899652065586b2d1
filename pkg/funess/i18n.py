from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, Optional

LANGUAGES = {"en": "English", "ja": "日本語"}

_LOCALES_CACHE: Dict[str, Dict] = {}


def _load_locale(lang: str) -> Dict:
    if lang in _LOCALES_CACHE:
        return _LOCALES_CACHE[lang]
    p = Path(__file__).parent / "locales" / f"{lang}.json"
    if not p.exists():
        _LOCALES_CACHE[lang] = {}
        return _LOCALES_CACHE[lang]
    with p.open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    _LOCALES_CACHE[lang] = data
    return data


def t(key: str, lang: str, default: Optional[str] = None) -> str:
    """Return the message for dot-separated ``key`` in ``lang``.

    Falls back to English, then to ``default`` or the key itself.
    """
    for code in (lang, "en"):
        cur = _load_locale(code)
        for part in key.split("."):
            if isinstance(cur, dict) and part in cur:
                cur = cur[part]
            else:
                cur = None
                break
        if isinstance(cur, str):
            return cur
    return default if default is not None else key
