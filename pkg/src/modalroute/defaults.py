"""Bundled default configuration, including the paper-shape backend pool.

Every value here can be overridden by a JSON file that is deep-merged on top (see ``config.load_config``).
Backend costs are in normalized units where one top-tier premium call costs 1.0. The pool is calibrated
so the published open/premium query and cost shares are reachable on the bundled corpus; it is a
calibration target, not a measurement.
"""

from __future__ import annotations

import copy

from .intake import DEFAULT_EXTENSIONS, DEFAULT_MAGIC, DEFAULT_MIME_RULES
from .intent import DEFAULT_ANAPHORA

KEYWORDS: dict[str, dict[str, int]] = {
    "math": {
        "solve": 3, "integral": 5, "integrate": 4, "derivative": 5, "differentiate": 5, "equation": 4,
        "equations": 4, "calculate": 3, "probability": 4, "algebra": 4, "arithmetic": 4, "prove": 3,
        "theorem": 4, "polynomial": 5, "fraction": 4, "fractions": 4, "geometry": 4, "triangle": 3,
        "math": 4, "simplify": 3, "factor": 3, "quadratic": 5, "percentage": 3, "percent": 2, "ratio": 3,
        "word problem": 4, "compute": 2, "sum of": 2, "average": 2, "interest rate": 3, "eigenvalues": 4,
        "limit": 2, "logarithm": 4, "remainder": 3, "how many": 1, "radius": 3, "area": 2, "sequence": 2,
    },
    "coding": {
        "code": 4, "function": 3, "python": 4, "javascript": 4, "java": 3, "typescript": 4, "rust": 3,
        "sql": 4, "bug": 4, "debug": 5, "compile": 4, "compiler": 4, "algorithm": 3, "implement": 3,
        "class": 2, "api": 3, "script": 3, "regex": 4, "refactor": 5, "unit test": 4, "unit tests": 4,
        "program": 3, "array": 3, "linked list": 5, "recursion": 4, "recursive": 4, "loop": 3,
        "variable": 3, "exception": 3, "stack trace": 5, "database": 2, "generate code": 5, "snippet": 4,
        "binary search": 5, "hash map": 4, "dictionary": 2, "endpoint": 3, "dockerfile": 4, "git": 3,
    },
    "summarization_writing": {
        "summarize": 5, "summarise": 5, "summary": 4, "tldr": 5, "key points": 4, "essay": 4, "write": 2,
        "rewrite": 4, "paraphrase": 5, "draft": 3, "email": 3, "letter": 3, "poem": 4, "story": 4,
        "haiku": 5, "blog post": 4, "article": 3, "headline": 3, "condense": 4, "translate": 3,
        "cover letter": 5, "proofread": 5, "tone": 2, "paragraph": 2, "abstract": 3, "outline": 3,
        "slogan": 3, "speech": 3, "limerick": 5, "bullet points": 3,
    },
    "general": {
        "what is": 2, "who was": 3, "who is": 3, "history": 3, "capital": 4, "why": 2, "explain": 2,
        "difference between": 3, "how does": 2, "fact": 2, "facts": 2, "country": 3, "planet": 3,
        "define": 3, "meaning": 2, "recommend": 2, "advice": 2, "trivia": 4, "population": 3,
        "when did": 3, "invented": 3, "science": 2, "biology": 3, "ocean": 2, "climate": 2,
        "economy": 2, "philosophy": 3, "century": 2, "empire": 3, "war": 2, "moon": 2, "volcano": 3,
    },
    "image_gen": {
        "generate an image": 5, "create an image": 5, "draw": 4, "illustration": 4, "illustrate": 4,
        "render": 3, "logo": 4, "poster": 4, "sketch": 4, "painting": 4, "wallpaper": 4, "artwork": 4,
        "image of": 3, "picture of": 3, "icon": 3, "digital art": 5, "watercolor": 4, "concept art": 5,
    },
}

# Detector and OCR phrasing that marks an image request as object detection.
OBJECT_DETECT_PHRASES = [
    "detect", "detection", "count", "how many", "locate", "find all", "bounding box", "bounding boxes",
    "spot every", "read the text", "extract text", "ocr",
]

_OPEN_LAT = {"fixed_ms": 250.0, "per_100_chars_ms": 8.0, "jitter_ms": 40.0}


def _backend(id, tier, cost, latency, quality, modalities=("text",), style="", default_quality=0.6):
    return {
        "id": id, "tier": tier, "cost_per_call": cost, "latency": latency, "quality": quality,
        "supported_modalities": list(modalities), "style": style, "default_quality": default_quality,
    }


BACKENDS = [
    # open-source pool
    _backend("qwen-coder-sim", "open_source", 0.16, {**_OPEN_LAT, "fixed_ms": 260.0},
             {"coding": 0.97, "math": 0.9, "general": 0.85, "complex": 0.6}),
    _backend("wizardmath-sim", "open_source", 0.15, _OPEN_LAT,
             {"math": 0.97, "general": 0.8, "complex": 0.6}),
    _backend("mistral-sim", "open_source", 0.14, {**_OPEN_LAT, "fixed_ms": 240.0},
             {"summarization_writing": 0.97, "general": 0.92, "complex": 0.6}),
    _backend("llama-sim", "open_source", 0.15, _OPEN_LAT,
             {"general": 0.97, "summarization_writing": 0.92, "document": 0.9, "ambiguous": 0.9,
              "complex": 0.6}),
    _backend("mixtral-moe-sim", "open_source", 0.18, {**_OPEN_LAT, "fixed_ms": 280.0},
             {"text_moe": 0.96, "general": 0.9}, modalities=("text", "image", "audio", "video", "document"),
             ),
    _backend("llava-sim", "open_source", 0.2, {"fixed_ms": 330.0, "per_100_chars_ms": 6.0, "jitter_ms": 50.0},
             {"vision": 0.96, "object_detect": 0.8, "complex": 0.7}, modalities=("text", "image"),
             style="In the image:"),
    _backend("ultravox-sim", "open_source", 0.18, {"fixed_ms": 320.0, "per_100_chars_ms": 6.0, "jitter_ms": 50.0},
             {"audio": 0.96, "complex": 0.7}, modalities=("text", "audio"), style="From the audio:"),
    _backend("video-llava-sim", "open_source", 0.26, {"fixed_ms": 430.0, "per_100_chars_ms": 6.0, "jitter_ms": 60.0},
             {"video": 0.95, "complex": 0.7}, modalities=("text", "video"), style="In the video:"),
    _backend("docrag-sim", "open_source", 0.18, {"fixed_ms": 300.0, "per_100_chars_ms": 6.0, "jitter_ms": 50.0},
             {"document": 0.96, "complex": 0.7}, modalities=("text", "document"), style="From the document:"),
    _backend("slm-sim", "open_source", 0.05, {"fixed_ms": 80.0, "per_100_chars_ms": 3.0, "jitter_ms": 20.0},
             {"object_detect": 0.95, "general": 0.8}),
    # perception tools
    _backend("yolo-sim", "tool", 0.02, {"fixed_ms": 40.0, "jitter_ms": 10.0}, {"object_detect": 0.99},
             modalities=("image",)),
    _backend("ocr-sim", "tool", 0.02, {"fixed_ms": 50.0, "jitter_ms": 10.0}, {"object_detect": 0.99},
             modalities=("image", "document")),
    _backend("tagger-sim", "tool", 0.02, {"fixed_ms": 40.0, "jitter_ms": 10.0}, {"object_detect": 0.99},
             modalities=("image",)),
    # premium pool
    _backend("gpt4-sim", "premium", 1.0, {"fixed_ms": 450.0, "per_100_chars_ms": 10.0, "jitter_ms": 60.0},
             {"general": 0.97, "coding": 0.97, "math": 0.97, "summarization_writing": 0.97, "complex": 0.97,
              "vision": 0.96, "document": 0.96, "audio": 0.95, "video": 0.94, "object_detect": 0.93,
              "text_moe": 0.96, "ambiguous": 0.95, "image_gen": 0.9},
             modalities=("text", "image", "audio", "video", "document"), default_quality=0.95),
    _backend("claude-sim", "premium", 0.9, {"fixed_ms": 430.0, "per_100_chars_ms": 10.0, "jitter_ms": 60.0},
             {"coding": 0.98, "math": 0.97, "summarization_writing": 0.96, "general": 0.95, "complex": 0.95},
             default_quality=0.9),
    _backend("gemini-sim", "premium", 0.85, {"fixed_ms": 420.0, "per_100_chars_ms": 10.0, "jitter_ms": 60.0},
             {"summarization_writing": 0.98, "general": 0.97, "math": 0.94, "coding": 0.94, "complex": 0.94},
             default_quality=0.9),
    _backend("dalle-sim", "premium", 1.2, {"fixed_ms": 900.0, "per_100_chars_ms": 5.0, "jitter_ms": 100.0},
             {"image_gen": 0.96}, style="[generated image]", default_quality=0.5),
]

_ALL = ["text", "image", "audio", "video", "document"]


def _route(id, kind, backend, tier, modalities, affinity, cost, modality=None, output="text", followup=False):
    return {
        "id": id, "kind": kind, "backend_id": backend, "tier": tier, "supported_modalities": list(modalities),
        "task_affinity": affinity, "cost": cost, "modality": modality, "output": output, "followup": followup,
    }


ROUTES = [
    _route("eff:coding", "efficient", "qwen-coder-sim", "open_source", ["text"],
           {"coding": 0.95, "math": 0.7, "general": 0.5, "summarization_writing": 0.3, "complex": 0.4}, 0.16),
    _route("eff:math", "efficient", "wizardmath-sim", "open_source", ["text"],
           {"math": 0.95, "coding": 0.4, "general": 0.4, "summarization_writing": 0.2, "complex": 0.4}, 0.15),
    _route("eff:writing", "efficient", "mistral-sim", "open_source", ["text"],
           {"summarization_writing": 0.95, "general": 0.7, "math": 0.3, "coding": 0.3, "complex": 0.45}, 0.14),
    _route("eff:general", "efficient", "llama-sim", "open_source", ["text"],
           {"general": 0.95, "summarization_writing": 0.75, "math": 0.5, "coding": 0.5, "ambiguous": 0.7,
            "document": 0.6, "vision": 0.3, "audio": 0.3, "video": 0.3, "object_detect": 0.2, "complex": 0.5}, 0.15),
    _route("prem:gpt4", "premium", "gpt4-sim", "premium", ["text"],
           {"general": 0.94, "coding": 0.95, "math": 0.95, "summarization_writing": 0.94, "complex": 0.99,
            "ambiguous": 0.9}, 1.0),
    _route("prem:claude", "premium", "claude-sim", "premium", ["text"],
           {"coding": 0.97, "math": 0.96, "summarization_writing": 0.9, "general": 0.9, "complex": 0.9}, 0.9),
    _route("prem:gemini", "premium", "gemini-sim", "premium", ["text"],
           {"summarization_writing": 0.96, "general": 0.93, "math": 0.88, "coding": 0.88, "complex": 0.88}, 0.85),
    _route("followup:moe", "efficient", "mixtral-moe-sim", "open_source", _ALL,
           {"text_moe": 0.95, "general": 0.6}, 0.18, followup=True),
    _route("pipe:image", "pipeline", "llava-sim", "open_source", ["text", "image"],
           {"vision": 0.93, "object_detect": 0.6, "complex": 0.3}, 0.2, modality="image"),
    _route("pipe:audio", "pipeline", "ultravox-sim", "open_source", ["text", "audio"],
           {"audio": 0.93, "complex": 0.3}, 0.18, modality="audio"),
    _route("pipe:video", "pipeline", "video-llava-sim", "open_source", ["text", "video"],
           {"video": 0.93, "complex": 0.3}, 0.26, modality="video"),
    _route("pipe:document", "pipeline", "docrag-sim", "open_source", ["text", "document"],
           {"document": 0.93, "complex": 0.3}, 0.18, modality="document"),
    _route("pipe:image_gen", "pipeline", "dalle-sim", "premium", ["text"],
           {"image_gen": 0.95}, 1.2, output="image"),
    _route("couplet", "couplet", "slm-sim", "open_source", ["text", "image", "document"],
           {"object_detect": 0.95, "vision": 0.5, "document": 0.3, "complex": 0.2}, 0.12),
    _route("cascade", "agent_cascade", "slm-sim", "open_source", _ALL,
           {"complex": 0.95, "ambiguous": 0.9, "vision": 0.4, "audio": 0.4, "video": 0.4, "document": 0.4,
            "object_detect": 0.3, "general": 0.5}, 0.5),
]

DEFAULT_CONFIG: dict = {
    "seed": 7,
    "intake": {"mime_rules": DEFAULT_MIME_RULES, "extensions": DEFAULT_EXTENSIONS, "magic": DEFAULT_MAGIC},
    "keywords": KEYWORDS,
    "complexity": {
        "alpha": 0.4, "beta": 0.25, "gamma": 0.35, "k_sat": 8.0, "cuts": [0.35, 0.65], "sharpness": 10.0,
        "tau": 0.55, "tau_step": 0.01,
        "signal_weights": {"code_block": 0.5, "sql": 0.45, "math": 0.35, "structured_data": 0.3,
                           "table": 0.3, "steps": 0.2},
    },
    "intent": {
        "theta_kw": 0.6, "k_kw": 2.0, "theta_struct": 0.6, "theta_clf": 0.5, "centroid_gap": 0.05,
        "centroid_temperature": 0.05, "centroid_min_cosine": 0.1, "multi_category_weight": 8,
        "theta_fu": 0.45, "anaphora": list(DEFAULT_ANAPHORA),
    },
    "routing": {"delta_m": 0.40, "delta_u": 0.30, "delta_t": 0.20, "lambda_c": 0.10},
    "backends": BACKENDS,
    "routes": ROUTES,
    "fusion": {"alpha_m": 0.4, "alpha_t": 0.3, "alpha_c": 0.3, "logit_scale": 4.0, "dominance_threshold": 0.75},
    "memory": {
        "short_term_k": 8, "tau_decay_ms": 600000.0, "threshold": 0.35, "budget_chars": 4000,
        "compression_stride": 10, "compression_sentences": 5, "drift_threshold": 30, "drift_step": 0.05,
        "theta_s_cap": 0.8, "relevant_k": 3, "mismatch_m": 0.3, "thetas": [0.6, 0.2, 0.2],
    },
    "couplet": {
        "slm_backend": "slm-sim",
        "tool_backends": {"object_detector": "yolo-sim", "ocr": "ocr-sim", "semantic_tagger": "tagger-sim"},
        "detector_confidence_floor": 0.5,
        "object_detect_phrases": OBJECT_DETECT_PHRASES,
    },
    "engine": {
        "routing_overhead_ms": 20.0, "fusion_ms": 15.0, "node_retries": 2, "max_workers": 4,
        "always_premium_backend": "gpt4-sim",
    },
    "feedback": {"flag_rate": 0.5},
    "eval": {"concurrency": 8, "premium_rate_limit": 4, "seeds": [7]},
    "data": {"annotations": None, "transcripts": None, "exemplars": None},
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)
