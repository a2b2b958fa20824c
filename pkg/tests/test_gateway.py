from __future__ import annotations

import base64
import json
import threading
from concurrent.futures import ThreadPoolExecutor

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walkguide.errors import (
    BackendUnavailable,
    GatewayTimeout,
    NoProvider,
    RequestRejected,
    ValidationError,
)
from walkguide.gateway import (
    ChatRequest,
    CountingBackend,
    DiskCache,
    EchoBackend,
    EmbeddingClient,
    FileDepthProvider,
    FileDetectionProvider,
    FlakyBackend,
    Gateway,
    HttpDepthProvider,
    MemoryCache,
    OpenAIChatBackend,
    SceneStub,
    ScriptedBackend,
    UserTurn,
    depth_provider,
)
from walkguide.gateway.stubs import clause_labels
from walkguide.geometry.io import save_depth
from walkguide.prompts import render_judge_prompts, render_system_prompt

PNG = b"\x89PNG\r\n\x1a\n" + b"\x00" * 16


def req(text="hi", image=None, **kw):
    return ChatRequest.single("sys", text, image, "m", **kw)


class TestRequest:
    def test_needs_a_turn(self):
        with pytest.raises(ValidationError):
            ChatRequest("s", (), "m")

    def test_tuple_turns_are_coerced(self):
        r = ChatRequest("s", [("a", None), ("b", PNG)], "m")
        assert r.user_turns == (UserTurn("a"), UserTurn("b", PNG))

    def test_rejects_non_bytes_image(self):
        with pytest.raises(ValidationError):
            ChatRequest("s", [("a", "not-bytes")], "m")

    def test_key_identical_inputs(self):
        assert req(image=PNG).cache_key() == req(image=PNG).cache_key()

    @pytest.mark.parametrize("other", [
        ChatRequest.single("sys2", "hi", PNG, "m"),
        ChatRequest.single("sys", "hi!", PNG, "m"),
        ChatRequest.single("sys", "hi", PNG + b"x", "m"),
        ChatRequest.single("sys", "hi", None, "m"),
        ChatRequest.single("sys", "hi", PNG, "m2"),
        ChatRequest.single("sys", "hi", PNG, "m", temperature=0.5),
        ChatRequest.single("sys", "hi", PNG, "m", max_tokens=7),
    ])
    def test_key_changes_with_any_field(self, other):
        assert other.cache_key() != req(image=PNG).cache_key()


class TestGateway:
    def test_echo(self):
        r = Gateway(EchoBackend("fixed")).complete(req())
        assert r.text == "fixed" and not r.cache_hit and r.latency_s >= 0

    def test_cache_hit_makes_no_call(self):
        stub = EchoBackend("fixed")
        gw = Gateway(stub, MemoryCache())
        cold = gw.complete(req())
        warm = gw.complete(req())
        assert warm.text == cold.text and warm.cache_hit and stub.calls == 1
        assert warm.latency_s == cold.latency_s

    def test_cache_bypass(self):
        stub = EchoBackend()
        gw = Gateway(stub, MemoryCache())
        gw.complete(req())
        gw.complete(req(), use_cache=False)
        assert stub.calls == 2

    def test_retry_then_success(self):
        stub = FlakyBackend(2, "done")
        assert Gateway(stub, backoff_s=0).complete(req()).text == "done"
        assert stub.calls == 3

    def test_exhausted(self):
        stub = FlakyBackend(5)
        with pytest.raises(BackendUnavailable) as exc:
            Gateway(stub, backoff_s=0).complete(req())
        assert exc.value.code == "backend-unavailable" and stub.calls == 3

    def test_timeout_code(self):
        with pytest.raises(GatewayTimeout) as exc:
            Gateway(FlakyBackend(5, timeout=True), backoff_s=0).complete(req())
        assert exc.value.code == "timeout"

    def test_rejection_not_retried(self):
        calls = []

        def script(request, n):
            calls.append(n)
            raise RequestRejected("bad", status=400, body="{}")

        with pytest.raises(RequestRejected):
            Gateway(ScriptedBackend(script), backoff_s=0).complete(req())
        assert calls == [1]

    def test_latency_covers_delay(self):
        r = Gateway(CountingBackend(delay_s=0.05)).complete(req())
        assert r.latency_s >= 0.05

    @pytest.mark.parametrize("limit", [1, 3])
    def test_in_flight_bound(self, limit):
        stub = CountingBackend(delay_s=0.02)
        gw = Gateway(stub, max_in_flight=limit)
        with ThreadPoolExecutor(8) as pool:
            list(pool.map(lambda i: gw.complete(req(str(i))), range(16)))
        assert stub.calls == 16
        assert 1 <= stub.peak_in_flight <= limit

    @settings(max_examples=25, deadline=None)
    @given(text=st.text(max_size=40), image=st.one_of(st.none(), st.binary(max_size=32)))
    def test_cold_equals_warm(self, text, image):
        gw = Gateway(ScriptedBackend(lambda r, n: r.prompt_text[::-1]), MemoryCache())
        r = req(text, image)
        assert gw.complete(r).text == gw.complete(r).text


class TestDiskCache:
    def test_persists_across_instances(self, tmp_path):
        stub = EchoBackend("x")
        Gateway(stub, DiskCache(tmp_path)).complete(req())
        again = Gateway(stub, DiskCache(tmp_path)).complete(req())
        assert again.cache_hit and stub.calls == 1
        assert len(DiskCache(tmp_path)) == 1

    def test_corrupt_entry_is_a_miss(self, tmp_path):
        cache = DiskCache(tmp_path)
        cache.put("ab12", {"text": "t", "latency_s": 0})
        (tmp_path / "ab" / "ab12.json").write_text("{broken")
        assert cache.get("ab12") is None

    def test_concurrent_writes(self, tmp_path):
        cache = DiskCache(tmp_path)
        threads = [threading.Thread(target=cache.put, args=(f"k{i % 3}", {"i": i})) for i in range(24)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(cache) == 3


def mock_client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


class TestOpenAIBackend:
    def test_wire_format(self, monkeypatch):
        monkeypatch.setenv("TEST_TOKEN", "sekret")
        seen = {}

        def handler(request: httpx.Request):
            seen["url"] = str(request.url)
            seen["auth"] = request.headers.get("authorization")
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json={"choices": [{"message": {"content": "hello"}}],
                                             "usage": {"prompt_tokens": 3, "completion_tokens": 1}})

        backend = OpenAIChatBackend("http://llm.test/v1/", "TEST_TOKEN", client=mock_client(handler))
        r = Gateway(backend).complete(req("look", PNG))
        assert r.text == "hello" and r.prompt_tokens == 3 and r.completion_tokens == 1
        assert seen["url"] == "http://llm.test/v1/chat/completions"
        assert seen["auth"] == "Bearer sekret"
        body = seen["body"]
        assert body["model"] == "m" and body["temperature"] == 0.0
        assert body["messages"][0] == {"role": "system", "content": "sys"}
        parts = body["messages"][1]["content"]
        url = parts[0]["image_url"]["url"]
        assert url.startswith("data:image/png;base64,")
        assert base64.b64decode(url.split(",", 1)[1]) == PNG
        assert parts[1] == {"type": "text", "text": "look"}

    def test_4xx_is_rejected_with_body(self):
        backend = OpenAIChatBackend("http://x", client=mock_client(
            lambda r: httpx.Response(422, text='{"error": "bad"}')))
        with pytest.raises(RequestRejected) as exc:
            Gateway(backend, backoff_s=0).complete(req())
        assert exc.value.status == 422 and "bad" in exc.value.body

    def test_5xx_retried(self):
        count = []

        def handler(request):
            count.append(1)
            if len(count) < 3:
                return httpx.Response(503)
            return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

        backend = OpenAIChatBackend("http://x", client=mock_client(handler))
        assert Gateway(backend, backoff_s=0).complete(req()).text == "ok"
        assert len(count) == 3

    def test_timeout(self):
        def handler(request):
            raise httpx.ReadTimeout("slow", request=request)

        backend = OpenAIChatBackend("http://x", client=mock_client(handler))
        with pytest.raises(GatewayTimeout):
            Gateway(backend, backoff_s=0).complete(req())


class TestProviders:
    def test_file_depth(self, tmp_path):
        p = save_depth(np.ones((4, 6), np.float32), tmp_path / "d.npy")
        d = FileDepthProvider().depth_infer(b"", (6, 4), hint=p)
        assert (d.width_px, d.height_px) == (6, 4)

    def test_file_depth_dims(self, tmp_path):
        p = save_depth(np.ones((4, 6), np.float32), tmp_path / "d.npy")
        with pytest.raises(ValidationError):
            FileDepthProvider().depth_infer(b"", (5, 4), hint=p)

    def test_http_depth_dims(self):
        client = mock_client(lambda r: httpx.Response(200, json={"depth": [[1.0, 2.0]]}))
        with pytest.raises(ValidationError):
            HttpDepthProvider("http://d", client=client).depth_infer(PNG, (3, 1))

    def test_no_provider(self):
        with pytest.raises(NoProvider) as exc:
            depth_provider(None)
        assert exc.value.code == "no-depth-provider"

    def test_detections_in_order_and_other(self, tmp_path, caplog):
        p = tmp_path / "det.json"
        p.write_text(json.dumps([{"label": "Car", "bbox": [0, 0, 0.5, 0.5]},
                                 {"label": "hoverboard", "bbox": [0.1, 0.1, 0.2, 0.2]}]))
        objs = FileDetectionProvider().detect(b"", hint=p)
        assert [o.label for o in objs] == ["car", "other:hoverboard"]
        assert "hoverboard" in caplog.text

    def test_empty_detection_file(self, tmp_path):
        p = tmp_path / "det.json"
        p.write_text("")
        assert FileDetectionProvider().detect(b"", hint=p) == []

    def test_embeddings(self):
        def handler(request):
            texts = json.loads(request.content)["input"]
            return httpx.Response(200, json={"data": [{"index": i, "embedding": [len(t), 1.0]}
                                                      for i, t in reversed(list(enumerate(texts)))]})

        vecs = EmbeddingClient("http://e", "emb", client=mock_client(handler)).embed(["a", "bbb"])
        assert vecs.tolist() == [[1.0, 1.0], [3.0, 1.0]]


class TestSceneStub:
    def test_clause_labels(self):
        system = render_system_prompt("general", [("car", [0, 0, 0.5, 0.5]), ("other:tuk tuk", [0, 0, 1, 1])])
        assert clause_labels(system) == ["car", "tuk tuk"]

    def test_judge_rating(self):
        system, user = render_judge_prompts("a car on the left", "a car on the left")
        text = Gateway(SceneStub()).complete(ChatRequest.single(system, user, None, "j")).text
        assert text.endswith("Rating: [[10]]")

    def test_variants_differ(self):
        r = req("Provide a one-sentence description of the destination where")
        assert (Gateway(SceneStub("a")).complete(r).text != Gateway(SceneStub("b")).complete(r).text)
