import random
import threading
import time

import pytest

from tearmt.core import Decoding
from tearmt.gateway import (
    CacheConflict,
    CompletionRequest,
    CompletionResponse,
    Gateway,
    MockProvider,
    ProviderError,
    ReplayMiss,
    ResponseCache,
    request_key,
)


def req(prompt="hello", model="m", tag=""):
    return CompletionRequest(model=model, prompt=prompt, decoding=Decoding(), tag=tag)


class TestRequestKey:
    def test_identical_requests_share_a_key(self):
        assert request_key(req()) == request_key(req())

    def test_tag_is_not_part_of_the_key(self):
        assert request_key(req(tag="a")) == request_key(req(tag="b"))

    def test_key_changes_with_any_field(self):
        base = request_key(req())
        assert request_key(req(prompt="other")) != base
        assert request_key(req(model="m2")) != base
        assert request_key(CompletionRequest("m", "hello", Decoding(temperature=0.7))) != base

    def test_key_is_stable(self):
        # Fixed digest algorithm over a canonical encoding; must never drift.
        assert request_key(req()) == "b4352a7a61ed19a288c7d2fb3af340879bf3d36ea3d410270cd4d1795449be01"


class TestCacheAndModes:
    def test_second_identical_request_is_a_cache_hit(self):
        gateway = Gateway(mode="mock", providers={"mock": MockProvider(handler=lambda r: "out")})
        first = gateway.complete(req())
        second = gateway.complete(req())
        assert first.provenance == "mock"
        assert second.provenance == "cache"
        assert second.text == first.text

    def test_scripted_mock_by_digest(self):
        key = request_key(req())
        provider = MockProvider(script={key: "Target: hello"})
        gateway = Gateway(mode="mock", providers={"mock": provider})
        response = gateway.complete(req())
        assert response.text == "Target: hello"
        assert response.provenance == "mock"

    def test_replay_miss_never_falls_through(self):
        gateway = Gateway(mode="replay")
        with pytest.raises(ReplayMiss):
            gateway.complete(req())

    def test_replay_hit_has_replay_provenance(self):
        cache = ResponseCache()
        cache.put(request_key(req()), req(), "frozen")
        gateway = Gateway(mode="replay", cache=cache)
        response = gateway.complete(req())
        assert response == CompletionResponse(text="frozen", provenance="replay", latency=0.0, attempt_count=0)

    def test_unscripted_mock_fails_after_budget(self):
        gateway = Gateway(mode="mock", providers={"mock": MockProvider()}, max_attempts=2, backoff_base=0.0)
        with pytest.raises(ProviderError):
            gateway.complete(req())


class TestRetries:
    def test_retry_until_success_counts_attempts(self):
        failures = {"left": 2}

        def flaky(request):
            if failures["left"] > 0:
                failures["left"] -= 1
                raise RuntimeError("transient")
            return "ok"

        gateway = Gateway(mode="mock", providers={"mock": MockProvider(handler=flaky)}, max_attempts=4, backoff_base=0.0)
        response = gateway.complete(req())
        assert response.text == "ok"
        assert response.attempt_count == 3

    def test_budget_exhaustion_is_provider_error(self):
        def always_down(request):
            raise RuntimeError("down")

        gateway = Gateway(
            mode="mock", providers={"mock": MockProvider(handler=always_down)}, max_attempts=3, backoff_base=0.0
        )
        with pytest.raises(ProviderError, match="all 3 attempts"):
            gateway.complete(req())


class TestBatch:
    def test_sequential_order_preserved(self):
        gateway = Gateway(mode="mock", providers={"mock": MockProvider(handler=lambda r: r.prompt.upper())})
        responses = gateway.complete_batch([req(prompt=f"p{i}") for i in range(10)], parallelism=1)
        assert [r.text for r in responses] == [f"P{i}" for i in range(10)]

    def test_parallel_with_random_delays_preserves_order(self):
        rng = random.Random(0)

        def slow(request):
            time.sleep(rng.random() * 0.02)
            return request.prompt.upper()

        gateway = Gateway(mode="mock", providers={"mock": MockProvider(handler=slow)})
        responses = gateway.complete_batch([req(prompt=f"p{i}") for i in range(10)], parallelism=4)
        assert [r.text for r in responses] == [f"P{i}" for i in range(10)]

    def test_partial_failure_is_per_item(self):
        def sometimes(request):
            if request.prompt == "p3":
                raise RuntimeError("permanent")
            return "ok"

        gateway = Gateway(
            mode="mock", providers={"mock": MockProvider(handler=sometimes)}, max_attempts=2, backoff_base=0.0
        )
        responses = gateway.complete_batch([req(prompt=f"p{i}") for i in range(10)], parallelism=3)
        errors = [r for r in responses if isinstance(r, ProviderError)]
        successes = [r for r in responses if isinstance(r, CompletionResponse)]
        assert len(errors) == 1 and len(successes) == 9
        assert isinstance(responses[3], ProviderError)


class TestExportImport:
    def test_round_trip_preserves_everything(self, tmp_path):
        cache = ResponseCache()
        for i in range(5):
            cache.put(request_key(req(prompt=f"p{i}")), req(prompt=f"p{i}"), f"resp{i}")
        path = tmp_path / "cache.jsonl"
        assert cache.export(path) == 5

        fresh = ResponseCache()
        assert fresh.import_file(path) == 5
        for i in range(5):
            assert fresh.get(request_key(req(prompt=f"p{i}"))) == f"resp{i}"

    def test_export_empty_cache(self, tmp_path):
        assert ResponseCache().export(tmp_path / "empty.jsonl") == 0

    def test_import_conflict_detected(self, tmp_path):
        first = ResponseCache()
        first.put(request_key(req()), req(), "one")
        path = tmp_path / "cache.jsonl"
        first.export(path)

        second = ResponseCache()
        second.put(request_key(req()), req(), "two")
        with pytest.raises(CacheConflict):
            second.import_file(path)

    def test_import_merges_new_keys(self, tmp_path):
        first = ResponseCache()
        first.put(request_key(req(prompt="a")), req(prompt="a"), "ra")
        path = tmp_path / "cache.jsonl"
        first.export(path)

        second = ResponseCache()
        second.put(request_key(req(prompt="b")), req(prompt="b"), "rb")
        assert second.import_file(path) == 1
        assert len(second) == 2


class TestCallLog:
    def test_tags_are_recorded(self):
        gateway = Gateway(mode="mock", providers={"mock": MockProvider(handler=lambda r: "x")})
        gateway.complete(req(prompt="a", tag="translate"))
        gateway.complete(req(prompt="b", tag="refine"))
        gateway.complete(req(prompt="b", tag="refine"))  # cache hit still logged
        assert len(gateway.calls_with_tag("refine")) == 2
        assert len(gateway.calls_with_tag("translate")) == 1

    def test_concurrent_completion_is_thread_safe(self):
        gateway = Gateway(mode="mock", providers={"mock": MockProvider(handler=lambda r: r.prompt)})
        threads = [
            threading.Thread(target=lambda i=i: gateway.complete(req(prompt=f"p{i % 4}", tag="t")))
            for i in range(32)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(gateway.calls_with_tag("t")) == 32
