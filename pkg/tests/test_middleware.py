from Utilities.errors import ThresholdError
from Utilities.middleware import tool_envelope


@tool_envelope
def _tool(mode: str):
    if mode == "threshold":
        raise ThresholdError("k on a threshold", {"k": 1.0})
    if mode == "value":
        raise ValueError("bad input")
    return {"message": "done", "value": 3}


def test_success_envelope():
    assert _tool("ok") == {"result": {"status": "success", "message": "done", "value": 3}}


def test_domain_error_envelope():
    result = _tool("threshold")["result"]
    assert result["status"] == "error"
    assert result["error"] == "ThresholdError"
    assert result["exit_code"] == 10


def test_value_error_envelope():
    result = _tool("value")["result"]
    assert result == {"status": "error", "message": "bad input", "error": "ValueError"}
