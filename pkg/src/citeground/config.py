"""Run configuration: INI file with [pipeline], [budget], and [gateway]
sections. CLI flags override file values; the API key comes from the
CITEGROUND_API_KEY environment variable, never from the file.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .gateway import HttpGateway, MockGateway, load_mock_script
from .longdoc import TokenBudget


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GatewayConfig:
    type: str = "http"  # http | mock
    base_url: str = ""
    model: str = ""
    max_in_flight: int = 4
    retries: int = 3
    timeout_secs: float = 120.0
    # mock options
    script: Optional[str] = None
    auto: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    language: str = "de"
    workers: int = 1
    percentile: float = 15.0
    per_language_percentile: bool = False
    gap_threshold_tokens: int = 150
    template_dir: Optional[str] = None
    word_counts: tuple[int, ...] = (200, 300, 400, 600)


@dataclass(frozen=True)
class Config:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    budget: TokenBudget = field(default_factory=TokenBudget)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    config_hash: str = ""
    base_dir: Path = field(default_factory=Path.cwd)

    def make_gateway(self):
        gw = self.gateway
        if gw.type == "mock":
            script = None
            if gw.script:
                script = load_mock_script(str(self._resolve(gw.script)))
            return MockGateway(script=script, auto=gw.auto)
        if gw.type == "http":
            if not gw.base_url:
                raise ConfigError("gateway.base_url is required for type=http")
            return HttpGateway(
                base_url=gw.base_url,
                model=gw.model,
                max_in_flight=gw.max_in_flight,
                retries=gw.retries,
                timeout_secs=gw.timeout_secs,
            )
        raise ConfigError(f"unknown gateway type {gw.type!r}")

    def _resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def load_config(path: str | Path) -> Config:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    parser = configparser.ConfigParser()
    try:
        parser.read_string(raw.decode("utf-8"))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc

    try:
        p = parser["pipeline"] if parser.has_section("pipeline") else {}
        b = parser["budget"] if parser.has_section("budget") else {}
        g = parser["gateway"] if parser.has_section("gateway") else {}
        pipeline = PipelineConfig(
            seed=int(p.get("seed", 0)),
            language=p.get("language", "de"),
            workers=int(p.get("workers", 1)),
            percentile=float(p.get("percentile", 15)),
            per_language_percentile=str(p.get("per_language_percentile", "false")).lower()
            == "true",
            gap_threshold_tokens=int(p.get("gap_threshold_tokens", 150)),
            template_dir=p.get("template_dir") or None,
            word_counts=tuple(
                int(w) for w in str(p.get("word_counts", "200,300,400,600")).split(",")
            ),
        )
        budget = TokenBudget(
            oneshot_limit=int(b.get("oneshot_limit", 30_000)),
            chunk_target=int(b.get("chunk_target", 15_000)),
            context_limit=int(b.get("context_limit", 100_000)),
        )
        gateway = GatewayConfig(
            type=g.get("type", "http"),
            base_url=g.get("base_url", ""),
            model=g.get("model", ""),
            max_in_flight=int(g.get("max_in_flight", 4)),
            retries=int(g.get("retries", 3)),
            timeout_secs=float(g.get("timeout_secs", 120)),
            script=g.get("script") or None,
            auto=str(g.get("auto", "false")).lower() == "true",
        )
    except ValueError as exc:
        raise ConfigError(f"invalid value in config file {path}: {exc}") from exc

    return Config(
        pipeline=pipeline,
        budget=budget,
        gateway=gateway,
        config_hash=hashlib.sha256(raw).hexdigest(),
        base_dir=path.parent.resolve(),
    )
