"""Scoring backends: real neural metric models and a deterministic stub.

Model weights are heavyweight, so the real backend loads lazily and only for
the metrics actually requested. The stub speaks the identical protocol with
scores from a constant or a digest-keyed table, which is what test suites
and replayed experiments run against.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .protocol import METRIC_BLEURT20, METRIC_COMET22, METRIC_COMETKIWI


class ModelUnavailable(RuntimeError):
    """A requested metric model (or its library) is not installed locally."""


#: Checkpoint names pinned per metric; reported in the handshake.
MODEL_REVISIONS = {
    METRIC_COMET22: "Unbabel/wmt22-comet-da",
    METRIC_COMETKIWI: "Unbabel/wmt22-cometkiwi-da",
    METRIC_BLEURT20: "lucadiliello/BLEURT-20",
}


def candidate_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class StubScorer:
    """Protocol-compliant scorer with fully deterministic outputs.

    Lookup order: the digest-keyed table (metric-qualified key first, bare
    candidate digest second), then the constant.
    """

    def __init__(self, constant: float = 0.5, table: dict[str, float] | None = None):
        self.constant = constant
        self.table = dict(table or {})
        self.metrics = list(MODEL_REVISIONS)

    @classmethod
    def from_table_file(cls, path: str | Path, constant: float = 0.5) -> "StubScorer":
        return cls(constant=constant, table=json.loads(Path(path).read_text("utf-8")))

    def score_batch(self, metric: str, requests: list[dict]) -> list[float]:
        scores = []
        for request in requests:
            digest = candidate_digest(request.get("candidate", ""))
            qualified = f"{metric}:{digest}"
            if qualified in self.table:
                scores.append(float(self.table[qualified]))
            elif digest in self.table:
                scores.append(float(self.table[digest]))
            else:
                scores.append(self.constant)
        return scores


class RealScorer:
    """Lazy-loading wrapper over the published metric models.

    Scores are returned on each model's native scale; rescaling for reports
    is the client's concern.
    """

    def __init__(self, metrics: list[str], device: str = "cpu", batch_size: int = 8):
        self.metrics = list(metrics)
        self.device = device
        self.batch_size = batch_size
        self._models: dict[str, object] = {}

    def _load_comet(self, checkpoint: str):
        try:
            from comet import download_model, load_from_checkpoint
        except ImportError as exc:
            raise ModelUnavailable(
                f"the comet library is required for {checkpoint}; install the [models] extra"
            ) from exc
        return load_from_checkpoint(download_model(checkpoint))

    def _load_bleurt(self):
        try:
            from bleurt_pytorch import BleurtForSequenceClassification, BleurtTokenizer
        except ImportError as exc:
            raise ModelUnavailable(
                "the bleurt-pytorch library is required for bleurt20; install the [models] extra"
            ) from exc
        name = MODEL_REVISIONS[METRIC_BLEURT20]
        return BleurtTokenizer.from_pretrained(name), BleurtForSequenceClassification.from_pretrained(name)

    def _model(self, metric: str):
        if metric not in self._models:
            if metric in (METRIC_COMET22, METRIC_COMETKIWI):
                self._models[metric] = self._load_comet(MODEL_REVISIONS[metric])
            elif metric == METRIC_BLEURT20:
                self._models[metric] = self._load_bleurt()
            else:
                raise ModelUnavailable(f"no model mapping for metric {metric!r}")
        return self._models[metric]

    def preload(self) -> None:
        for metric in self.metrics:
            self._model(metric)

    def score_batch(self, metric: str, requests: list[dict]) -> list[float]:
        model = self._model(metric)
        if metric == METRIC_BLEURT20:
            import torch

            tokenizer, bleurt = model
            bleurt.eval()
            scores: list[float] = []
            for start in range(0, len(requests), self.batch_size):
                chunk = requests[start : start + self.batch_size]
                inputs = tokenizer(
                    [r["reference"] for r in chunk],
                    [r["candidate"] for r in chunk],
                    padding=True,
                    truncation=True,
                    return_tensors="pt",
                )
                with torch.no_grad():
                    scores.extend(float(v) for v in bleurt(**inputs).logits.flatten())
            return scores
        payload = [
            {"src": r.get("source"), "mt": r["candidate"], "ref": r.get("reference")} for r in requests
        ]
        output = model.predict(payload, batch_size=self.batch_size, gpus=0, progress_bar=False)
        return [float(v) for v in output.scores]
