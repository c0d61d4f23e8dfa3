"""Python bindings for the promptprobe adversarial suffix search core."""

import json

from ._core import (
    AttackResult,
    EmbeddingTable,
    LossBreakdown,
    PromptProbeError,
    SearchConfig,
    asr,
    brute_force_search,
    combined_loss,
    concept_shift,
    cosine,
    fid,
    fid_from_stats,
    gaussian_stats,
    load_table,
    normalize,
    parse_table,
    report,
    run_campaign_json,
    sanitize,
    search,
    shortlist,
    trace_sqrt_product,
)


def run_campaign(config_path, output=None):
    """Run a campaign from a TOML config and return its summary as a dict."""
    return json.loads(run_campaign_json(str(config_path), "" if output is None else str(output)))


__all__ = [
    "AttackResult",
    "EmbeddingTable",
    "LossBreakdown",
    "PromptProbeError",
    "SearchConfig",
    "asr",
    "brute_force_search",
    "combined_loss",
    "concept_shift",
    "cosine",
    "fid",
    "fid_from_stats",
    "gaussian_stats",
    "load_table",
    "normalize",
    "parse_table",
    "report",
    "run_campaign",
    "sanitize",
    "search",
    "shortlist",
    "trace_sqrt_product",
]
