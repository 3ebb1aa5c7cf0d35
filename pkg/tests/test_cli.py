"""Tests for the experiment runner.

Every case drives ``main`` in-process on spec files under tmp_path and
checks the exit-code contract (0 ok, 2 parse, 3 validation, 4 bound,
5 cap) plus the byte-identity of re-run reports.  Numeric expectations
are frozen from hand-computable instances: the noiseless channel leaks
exactly one bit per message bit, the mirrored-spectrum qubit pair has
typical trace 0.4928 at n = 2, and the bundled 6x8 section has
d_S = 4, d_X = 3.
"""

import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_unitary, rng

from cqwiretap import codes, serialize
from cqwiretap.channels import CqChannel
from cqwiretap.cli import main
from cqwiretap.config import ENV_CAP


def flip_channel() -> CqChannel:
    return CqChannel((0, 1), 2, {0: np.diag([0.8, 0.2]), 1: np.diag([0.2, 0.8])})


def rotated_channel(seed: int) -> CqChannel:
    # common spectrum, independent Haar bases; projector families do not
    # commute, so the sandwich ordering check is expected to fail
    g = rng(seed)
    outputs = {}
    for x in range(2):
        u = random_unitary(g, 2)
        outputs[x] = u @ np.diag([0.8, 0.2]) @ u.conj().T
    return CqChannel((0, 1), 2, outputs)


def noiseless(k: int) -> CqChannel:
    eye = np.eye(k)
    return CqChannel(range(k), k, {x: np.outer(eye[x], eye[x]) for x in range(k)})


def xor_bri_json() -> dict:
    return {"S": 2, "X": 2, "M": [0, 1], "table": [[0, 1], [1, 0]]}


def perfect_code(k: int) -> codes.TransmissionCode:
    eye = np.eye(k)
    return codes.TransmissionCode(
        {c: (c,) for c in range(k)},
        {c: np.outer(eye[c], eye[c]) for c in range(k)},
        n=1,
        dim=k,
    )


class Workspace:
    def __init__(self, root):
        self.root = root

    def file(self, name, obj) -> str:
        path = self.root / name
        serialize.dump_json(obj, path)
        return str(path)

    def channel(self, name, v) -> str:
        return self.file(name, serialize.channel_to_json(v))

    def spec(self, kind, inputs, params, output="report.json", name="spec.json") -> str:
        return self.file(
            name,
            {"kind": kind, "inputs": inputs, "params": params, "output": str(self.root / output)},
        )

    def out(self, name="report.json"):
        return self.root / name


@pytest.fixture()
def ws(tmp_path):
    return Workspace(tmp_path)


class TestExitCodes:
    def test_missing_spec_file(self, tmp_path):
        assert main(["verify-bri", str(tmp_path / "absent.json")]) == 2

    def test_unparseable_spec(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["verify-bri", str(path)]) == 2

    def test_argparse_errors_exit_2(self):
        with pytest.raises(SystemExit) as info:
            main(["no-such-subcommand", "x.json"])
        assert info.value.code == 2
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 2

    def test_kind_mismatch(self, ws):
        spec = ws.spec("capacity", {}, {})
        assert main(["verify-bri", spec]) == 3

    def test_missing_output(self, ws):
        path = ws.file("spec.json", {"kind": "verify-bri", "inputs": {}, "params": {}})
        assert main(["verify-bri", path]) == 3

    def test_missing_input_file_role(self, ws):
        spec = ws.spec("verify-bri", {}, {})
        assert main(["verify-bri", spec]) == 3

    def test_unreadable_referenced_file(self, ws):
        # referenced files follow the same parse contract as the spec file
        spec = ws.spec("verify-bri", {"bri": str(ws.root / "absent.json")}, {})
        assert main(["verify-bri", spec]) == 2

    def test_unparseable_referenced_file(self, ws):
        path = ws.root / "table.json"
        path.write_text("{half a table")
        spec = ws.spec("verify-bri", {"bri": str(path)}, {})
        assert main(["verify-bri", spec]) == 2

    def test_resource_cap_exit(self, ws):
        ws.channel("v.json", flip_channel())
        spec = ws.spec(
            "typicality-report",
            {"channel": str(ws.root / "v.json")},
            {"p": [0.6, 0.4], "delta": 0.5, "ns": [3]},
        )
        assert main(["typicality-report", spec, "--cap", "4"]) == 5

    def test_cap_override_is_restored(self, ws):
        ws.channel("v.json", flip_channel())
        spec = ws.spec(
            "typicality-report",
            {"channel": str(ws.root / "v.json")},
            {"p": [0.6, 0.4], "delta": 0.5, "ns": [3]},
        )
        saved = os.environ.get(ENV_CAP)
        main(["typicality-report", spec, "--cap", "4"])
        assert os.environ.get(ENV_CAP) == saved


class TestVerifyBri:
    def test_bundled_section(self, ws):
        spec = ws.spec("verify-bri", {"bri": str(serialize.bundled("section_6x8.json"))}, {})
        assert main(["verify-bri", spec]) == 0
        report = serialize.load_json(ws.out())
        assert report["d_s"] == 4
        assert report["d_x"] == 3
        assert report["balance"] == [24, 24]
        assert report["irreducible"] is True
        assert report["ok"] is True

    def test_rerun_byte_identical(self, ws):
        spec = ws.spec("verify-bri", {"bri": str(serialize.bundled("section_6x8.json"))}, {})
        main(["verify-bri", spec])
        first = ws.out().read_bytes()
        main(["verify-bri", spec])
        assert ws.out().read_bytes() == first

    def test_not_biregular_exits_4(self, ws):
        path = ws.file("bad.json", {"S": 2, "X": 2, "M": [0], "table": [[0, 0], [0, 1]]})
        spec = ws.spec("verify-bri", {"bri": path}, {})
        assert main(["verify-bri", spec]) == 4

    def test_reducible_section_exits_4(self, ws):
        # biregular but disconnected: evens and odds never share an image
        table = [[0, 1, 0, 1], [1, 0, 1, 0]]
        path = ws.file("red.json", {"S": 2, "X": 4, "M": [0], "table": table})
        spec = ws.spec("verify-bri", {"bri": path}, {})
        assert main(["verify-bri", spec]) == 4
        report = serialize.load_json(ws.out())
        assert report["irreducible"] is False
        assert report["lambda2"][0][1] == 1.0

    def test_out_flag_overrides(self, ws):
        spec = ws.spec("verify-bri", {"bri": str(serialize.bundled("section_6x8.json"))}, {})
        target = ws.root / "elsewhere.json"
        assert main(["verify-bri", spec, "--out", str(target)]) == 0
        assert target.is_file()


class TestBoundChain:
    def setup_spec(self, ws, v_prime, channel=None, m_dist=None):
        ws.channel("v.json", channel or flip_channel())
        bri_path = ws.file("f.json", xor_bri_json())
        params = {"v_prime": v_prime}
        if m_dist is not None:
            params["m_dist"] = m_dist
        return ws.spec(
            "bound-chain",
            {"channel": str(ws.root / "v.json"), "bri": bri_path},
            params,
        )

    def test_scale_mode_all_hold(self, ws):
        spec = self.setup_spec(ws, {"mode": "scale", "factor": 0.9})
        assert main(["bound-chain", spec]) == 0
        rows = serialize.load_json(ws.out())
        assert [r["name"] for r in rows] == [
            "leakage-vs-divergence",
            "divergence-vs-subnormalized",
            "divergence-vs-renyi2",
            "renyi2-vs-spectrum",
            "leakage-total",
        ]
        assert all(r["holds"] for r in rows)

    def test_csv_alongside_json(self, ws):
        spec = self.setup_spec(ws, {"mode": "identity"})
        assert main(["bound-chain", spec]) == 0
        csv = (ws.root / "report.csv").read_text()
        assert csv.splitlines()[0] == "name,lhs,rhs,slack"
        assert len(csv.splitlines()) == 6

    def test_rerun_byte_identical(self, ws):
        spec = self.setup_spec(ws, {"mode": "scale", "factor": 0.75})
        main(["bound-chain", spec])
        first = ws.out().read_bytes(), (ws.root / "report.csv").read_bytes()
        main(["bound-chain", spec])
        assert (ws.out().read_bytes(), (ws.root / "report.csv").read_bytes()) == first

    def test_typicality_mode_commuting(self, ws):
        # n = 2, delta = 0.5 admits exactly the two mixed-type strings,
        # matching the two-input function table
        spec = self.setup_spec(
            ws, {"mode": "typicality", "p": [0.6, 0.4], "n": 2, "delta": 0.5}
        )
        assert main(["bound-chain", spec]) == 0
        rows = serialize.load_json(ws.out())
        assert all(r["holds"] for r in rows)

    def test_typicality_mode_ordering_violation_exits_4(self, ws):
        spec = self.setup_spec(
            ws,
            {"mode": "typicality", "p": [0.55, 0.45], "n": 3, "delta": 0.5},
            channel=rotated_channel(51),
        )
        assert main(["bound-chain", spec]) == 4

    def test_typicality_mode_size_mismatch(self, ws):
        # delta = 1.5 admits all four strings, too many for a 2-input table
        spec = self.setup_spec(
            ws, {"mode": "typicality", "p": [0.6, 0.4], "n": 2, "delta": 1.5}
        )
        assert main(["bound-chain", spec]) == 3

    def test_bad_m_dist_length(self, ws):
        spec = self.setup_spec(ws, {"mode": "identity"}, m_dist=[0.2, 0.3, 0.5])
        assert main(["bound-chain", spec]) == 3

    def test_unknown_mode(self, ws):
        spec = self.setup_spec(ws, {"mode": "shrink"})
        assert main(["bound-chain", spec]) == 3


class TestCapacity:
    def test_v_equals_w_is_zero(self, ws):
        ws.channel("w.json", flip_channel())
        ws.channel("v.json", flip_channel())
        spec = ws.spec(
            "capacity",
            {"channel_w": str(ws.root / "w.json"), "channel_v": str(ws.root / "v.json")},
            {"seed": 11},
        )
        assert main(["capacity", spec]) == 0
        report = serialize.load_json(ws.out())
        assert report["value"] == 0.0
        assert report["converged"] is True

    def test_seed_required(self, ws):
        ws.channel("w.json", flip_channel())
        ws.channel("v.json", noiseless(2))
        spec = ws.spec(
            "capacity",
            {"channel_w": str(ws.root / "w.json"), "channel_v": str(ws.root / "v.json")},
            {},
        )
        assert main(["capacity", spec]) == 3

    def test_seed_flag_supplies_missing_seed(self, ws):
        ws.channel("w.json", noiseless(2))
        ws.channel("v.json", flip_channel())
        spec = ws.spec(
            "capacity",
            {"channel_w": str(ws.root / "w.json"), "channel_v": str(ws.root / "v.json")},
            {},
        )
        assert main(["capacity", spec, "--seed", "7"]) == 0
        report = serialize.load_json(ws.out())
        assert report["value"] > 0.0

    def test_rerun_byte_identical(self, ws):
        ws.channel("w.json", noiseless(2))
        ws.channel("v.json", flip_channel())
        spec = ws.spec(
            "capacity",
            {"channel_w": str(ws.root / "w.json"), "channel_v": str(ws.root / "v.json")},
            {"seed": 3},
        )
        main(["capacity", spec])
        first = ws.out().read_bytes()
        main(["capacity", spec])
        assert ws.out().read_bytes() == first

    def test_lifted_two_letter(self, ws):
        ws.channel("w.json", noiseless(2))
        ws.channel("v.json", flip_channel())
        spec = ws.spec(
            "capacity",
            {"channel_w": str(ws.root / "w.json"), "channel_v": str(ws.root / "v.json")},
            {"seed": 5, "n": 2},
        )
        assert main(["capacity", spec]) == 0
        assert serialize.load_json(ws.out())["n"] == 2


class TestBuildAndEval:
    def build_spec(self, ws, with_bri=False, max_error=None):
        ws.channel("w.json", noiseless(2))
        inputs = {"channel": str(ws.root / "w.json")}
        if with_bri:
            inputs["bri"] = ws.file("f.json", xor_bri_json())
        params = {"n": 1, "codewords": [[0, [0]], [1, [1]]]}
        if max_error is not None:
            params["max_error"] = max_error
        return ws.spec("build-code", inputs, params, output="code.json")

    def test_transmission_code_written(self, ws):
        assert main(["build-code", self.build_spec(ws, max_error=0.0)]) == 0
        code = serialize.code_from_json(serialize.load_json(ws.root / "code.json"))
        assert isinstance(code, codes.TransmissionCode)
        assert codes.error_max(code, noiseless(2)) == 0.0

    def test_modular_code_written(self, ws):
        assert main(["build-code", self.build_spec(ws, with_bri=True)]) == 0
        code = serialize.code_from_json(serialize.load_json(ws.root / "code.json"))
        assert isinstance(code, codes.CommonRandomnessCode)
        assert code.seeds == (0, 1)

    def test_error_budget_violation_exits_4(self, ws):
        ws.channel("w.json", flip_channel())
        spec = ws.spec(
            "build-code",
            {"channel": str(ws.root / "w.json")},
            {"n": 1, "codewords": [[0, [0]], [1, [1]]], "max_error": 0.0},
            output="code.json",
        )
        assert main(["build-code", spec]) == 4

    def test_eval_leakage_noiseless_bit(self, ws):
        main(["build-code", self.build_spec(ws)])
        ws.channel("v.json", noiseless(2))
        spec = ws.spec(
            "eval-leakage",
            {"channel": str(ws.root / "v.json"), "code": str(ws.root / "code.json")},
            {},
            name="eval.json",
        )
        assert main(["eval-leakage", spec]) == 0
        report = serialize.load_json(ws.out())
        assert report["leakage"] == pytest.approx(1.0, abs=1e-12)

    def test_adversarial_needs_seed(self, ws):
        main(["build-code", self.build_spec(ws)])
        ws.channel("v.json", noiseless(2))
        spec = ws.spec(
            "eval-leakage",
            {"channel": str(ws.root / "v.json"), "code": str(ws.root / "code.json")},
            {"adversarial": True},
            name="eval.json",
        )
        assert main(["eval-leakage", spec]) == 3

    def test_adversarial_reported(self, ws):
        main(["build-code", self.build_spec(ws)])
        ws.channel("v.json", flip_channel())
        spec = ws.spec(
            "eval-leakage",
            {"channel": str(ws.root / "v.json"), "code": str(ws.root / "code.json")},
            {"adversarial": True, "seed": 2, "m_dist": [0.5, 0.5]},
            name="eval.json",
        )
        assert main(["eval-leakage", spec]) == 0
        report = serialize.load_json(ws.out())
        assert report["adversarial"]["value"] >= report["leakage"] - 1e-9


class TestTypicalityReport:
    def run_spec(self, ws, ns=(2, 3), channel=None):
        ws.channel("v.json", channel or flip_channel())
        spec = ws.spec(
            "typicality-report",
            {"channel": str(ws.root / "v.json")},
            {"p": [0.6, 0.4], "delta": 0.5, "ns": list(ns)},
        )
        return main(["typicality-report", spec])

    def test_commuting_instance_ok(self, ws):
        assert self.run_spec(ws) == 0
        report = serialize.load_json(ws.out())
        assert [block["n"] for block in report["per_n"]] == [2, 3]
        assert report["trace_exponent"] is not None

    def test_csv_columns_and_frozen_trace(self, ws):
        self.run_spec(ws)
        lines = (ws.root / "report.csv").read_text().splitlines()
        assert lines[0].split(",")[:3] == ["n", "trace", "rank"]
        assert lines[0].count(",") == 16
        first = lines[1].split(",")
        # spectrum of the average state is (0.56, 0.44); at n = 2 only the
        # two mixed strings are typical, so the trace is 2 * 0.56 * 0.44
        assert float(first[1]) == pytest.approx(0.4928, abs=1e-12)

    def test_rerun_byte_identical(self, ws):
        self.run_spec(ws)
        first = ws.out().read_bytes(), (ws.root / "report.csv").read_bytes()
        self.run_spec(ws)
        assert (ws.out().read_bytes(), (ws.root / "report.csv").read_bytes()) == first

    def test_ordering_violation_exits_4(self, ws):
        ws.channel("v.json", rotated_channel(51))
        spec = ws.spec(
            "typicality-report",
            {"channel": str(ws.root / "v.json")},
            {"p": [0.55, 0.45], "delta": 0.5, "ns": [3]},
        )
        assert main(["typicality-report", spec]) == 4

    def test_bad_ns(self, ws):
        ws.channel("v.json", flip_channel())
        spec = ws.spec(
            "typicality-report",
            {"channel": str(ws.root / "v.json")},
            {"p": [0.6, 0.4], "delta": 0.5, "ns": [0]},
        )
        assert main(["typicality-report", spec]) == 3


class TestDerandomize:
    def setup_files(self, ws):
        t = perfect_code(2)
        inner = codes.assemble_bri_modular(t, serialize.bri_from_json(xor_bri_json()))
        ws.channel("w.json", noiseless(2))
        ws.file("seed_code.json", serialize.code_to_json(t))
        ws.file("inner.json", serialize.code_to_json(inner))
        return {
            "channel_w": str(ws.root / "w.json"),
            "seed_code": str(ws.root / "seed_code.json"),
            "code": str(ws.root / "inner.json"),
        }

    def test_error_and_rate(self, ws):
        inputs = self.setup_files(ws)
        spec = ws.spec("derandomize", inputs, {"N": 2, "eps_prime": 0.0, "eps": 0.0})
        assert main(["derandomize", spec]) == 0
        report = serialize.load_json(ws.out())
        assert report["error"] == 0.0
        assert report["rate"] == pytest.approx(2.0 / 3.0, abs=1e-15)
        assert report["n_total"] == 3
        assert report["messages"] == 4

    def test_leakage_budget_violation(self, ws):
        # the noiseless eavesdropper reads both message bits, so a zero
        # leakage budget must fail
        inputs = self.setup_files(ws)
        inputs["channel_v"] = inputs["channel_w"]
        spec = ws.spec("derandomize", inputs, {"N": 2, "eps_prime": 0.0, "eps": 0.0})
        assert main(["derandomize", spec]) == 4
        report = serialize.load_json(ws.out())
        assert report["leakage"] == pytest.approx(2.0, abs=1e-9)

    def test_generous_budget_holds(self, ws):
        inputs = self.setup_files(ws)
        inputs["channel_v"] = inputs["channel_w"]
        spec = ws.spec("derandomize", inputs, {"N": 2, "eps_prime": 0.1, "eps": 1.0})
        assert main(["derandomize", spec]) == 0

    def test_wrong_code_kinds(self, ws):
        inputs = self.setup_files(ws)
        inputs["seed_code"], inputs["code"] = inputs["code"], inputs["seed_code"]
        spec = ws.spec("derandomize", inputs, {"N": 1})
        assert main(["derandomize", spec]) == 3


class TestConsoleScript:
    def test_installed_entry_point(self, ws):
        exe = shutil.which("cqwiretap")
        if exe is None:
            pytest.skip("console script not installed")
        spec = ws.spec("verify-bri", {"bri": str(serialize.bundled("section_6x8.json"))}, {})
        done = subprocess.run([exe, "verify-bri", spec], capture_output=True, text=True)
        assert done.returncode == 0
        assert "d_S=4 d_X=3" in done.stdout

    def test_module_invocation(self, ws):
        spec = ws.spec("verify-bri", {"bri": str(serialize.bundled("section_6x8.json"))}, {})
        done = subprocess.run(
            [sys.executable, "-m", "cqwiretap.cli", "verify-bri", spec],
            capture_output=True,
            text=True,
        )
        assert done.returncode == 0
