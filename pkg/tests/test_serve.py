import base64
import json
import urllib.error
import urllib.request

import numpy as np
import pytest

from thermoforge.deeponet import DeepONetModel
from thermoforge.serve import InferenceService, canonical_json, start_background


@pytest.fixture(scope="module")
def live(tiny_vrrae, tiny_data):
    surrogate = DeepONetModel((32, 32), init_seed=4)
    surrogate.target_field = "gradient_magnitude"
    manifest = tiny_data["manifest"]
    test_rasters = tiny_data["rasters"][manifest.sample_indices("test")]
    ref = (manifest.area_fraction["train_min"], manifest.area_fraction["train_max"])
    svc = InferenceService(tiny_vrrae, surrogate, ref, test_rasters)
    server, url = start_background(svc)
    yield {"svc": svc, "url": url}
    server.shutdown()


def get(url):
    with urllib.request.urlopen(url) as resp:
        return resp.status, resp.read()


def post(url, payload):
    req = urllib.request.Request(url, data=json.dumps(payload).encode(),
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as err:
        return err.code, err.read()


class TestMetaAndSamples:
    def test_meta(self, live):
        status, body = get(live["url"] + "/meta")
        meta = json.loads(body)
        assert status == 200
        assert meta["k_star"] == 8
        assert meta["grid"] == [32, 32]
        assert len(meta["stats"]["mean"]) == 8

    def test_samples_deterministic(self, live):
        _, b1 = get(live["url"] + "/samples?n=4&seed=3")
        _, b2 = get(live["url"] + "/samples?n=4&seed=3")
        assert b1 == b2
        codes = json.loads(b1)["codes"]
        assert len(codes) == 4 and len(codes[0]) == 8

    def test_unknown_endpoint_404(self, live):
        status, _ = post(live["url"] + "/nope", {})
        assert status == 404


class TestDecodePredict:
    def _sample_alpha(self, live):
        _, body = get(live["url"] + "/samples?n=1&seed=0")
        return json.loads(body)["codes"][0]

    def test_decode_payload_arithmetic(self, live):
        alpha = self._sample_alpha(live)
        status, body = post(live["url"] + "/decode", {"alpha": alpha})
        assert status == 200
        payload = json.loads(body)
        raster = base64.b64decode(payload["raster"])
        assert len(raster) == 32 * ((32 + 7) // 8)
        assert set(payload["validity"]) == {
            "figure_count", "area_fraction", "valid", "reference_range", "boundary_touching"}

    def test_predict_payload_arithmetic(self, live):
        alpha = self._sample_alpha(live)
        status, body = post(live["url"] + "/predict", {"alpha": alpha})
        payload = json.loads(body)
        field = base64.b64decode(payload["field"])
        assert len(field) == 32 * 32 * 4
        vals = np.frombuffer(field, dtype="<f4")
        assert float(vals.min()) == payload["min"]
        assert float(vals.max()) == payload["max"]

    def test_identical_requests_identical_bytes(self, live):
        alpha = self._sample_alpha(live)
        _, b1 = post(live["url"] + "/decode", {"alpha": alpha})
        _, b2 = post(live["url"] + "/decode", {"alpha": alpha})
        assert b1 == b2

    def test_interpolate_t0_byte_equals_decode(self, live):
        alpha_a = self._sample_alpha(live)
        _, samples = get(live["url"] + "/samples?n=2&seed=5")
        alpha_b = json.loads(samples)["codes"][1]
        _, decode_body = post(live["url"] + "/decode", {"alpha": alpha_a})
        status, interp_body = post(live["url"] + "/interpolate",
                                   {"alpha_a": alpha_a, "alpha_b": alpha_b, "t": 0.0})
        assert status == 200
        interp = json.loads(interp_body)
        assert canonical_json(interp["decode"]) == decode_body
        # and the combined payload carries a matching predict block
        _, predict_body = post(live["url"] + "/predict", {"alpha": alpha_a})
        assert canonical_json(interp["predict"]) == predict_body

    def test_malformed_alpha_400(self, live):
        url = live["url"]
        for bad in ({"alpha": [0.0] * 5},
                    {"alpha": ["x"] * 8},
                    {"alpha": None},
                    {}):
            status, body = post(url + "/decode", bad)
            assert status == 400
            assert "error" in json.loads(body)
        status, _ = post(url + "/predict", {"alpha": [1e309] * 8})  # inf after JSON parse
        assert status == 400

    def test_nonfinite_alpha_400(self, live):
        svc = live["svc"]
        status, payload = svc.handle("POST", "/decode",
                                     b'{"alpha": [NaN,0,0,0,0,0,0,0]}')
        assert status == 400

    def test_out_of_stats_range_allowed_but_flagged(self, live):
        alpha = [1e3] * 8  # far outside learned coefficients, still finite
        status, body = post(live["url"] + "/decode", {"alpha": alpha})
        assert status == 200
        assert json.loads(body)["validity"]["valid"] in (True, False)

    def test_bad_t_400(self, live):
        alpha = self._sample_alpha(live)
        status, _ = post(live["url"] + "/interpolate",
                         {"alpha_a": alpha, "alpha_b": alpha, "t": 1.5})
        assert status == 400


def test_503_while_loading():
    import threading
    from http.server import ThreadingHTTPServer

    from thermoforge.serve import _Handler

    handler = type("H", (_Handler,), {"service": None})
    srv = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    url = f"http://127.0.0.1:{srv.server_address[1]}/meta"
    try:
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(url)
        assert err.value.code == 503
    finally:
        srv.shutdown()
