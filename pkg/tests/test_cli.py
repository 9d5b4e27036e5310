from __future__ import annotations

import json
from pathlib import Path

from conftest import FIXTURE_CORPUS
from todbench.cli import main

WEATHER_SCHEMA = str(FIXTURE_CORPUS / "schemas" / "Weather.json")


def _write_config(tmp_path: Path, **overrides) -> Path:
    lines = [f'corpus = "{FIXTURE_CORPUS}"', 'profile = "oracle"',
             f'out = "{tmp_path / "out"}"']
    for key, value in overrides.items():
        if isinstance(value, bool):
            lines.append(f"{key} = {str(value).lower()}")
        elif isinstance(value, str):
            lines.append(f'{key} = "{value}"')
        else:
            lines.append(f"{key} = {value}")
    path = tmp_path / "run.toml"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_validate_ok_call(capsys):
    code = main(["validate", "--schema", WEATHER_SCHEMA,
                 "APICall(method='GetWeather', parameters={city: Vancouver})"])
    assert code == 0
    assert "valid" in capsys.readouterr().out


def test_validate_unknown_slot_suggests_fix(capsys):
    code = main(["validate", "--schema", WEATHER_SCHEMA,
                 "APICall(method='GetWeather', parameters={citty: Vancouver})"])
    assert code == 1
    out = capsys.readouterr().out
    assert 'unknown parameter "citty"' in out and "city" in out


def test_validate_malformed_call_exits_2():
    assert main(["validate", "--schema", WEATHER_SCHEMA,
                 "APICall(method='GetWeather', parameters={city: Vanc"]) == 2


def test_validate_bad_schema_exits_3(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert main(["validate", "--schema", str(bad),
                 "APICall(method='X', parameters={})"]) == 3


def test_run_then_score_offline(tmp_path, capsys):
    config = _write_config(tmp_path)
    assert main(["run", "--config", str(config)]) == 0
    out_dir = tmp_path / "out"
    transcripts = out_dir / "transcripts.jsonl"
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert transcripts.exists()
    assert manifest["backend"]["profile"] == "oracle"
    assert all(d["status"] == "complete" for d in manifest["dialogs"])

    assert main(["score", "--transcripts", str(transcripts),
                 "--corpus", str(FIXTURE_CORPUS),
                 "--out", str(out_dir)]) == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert report["both"]["full_api_accuracy"] == 1.0
    assert (out_dir / "success_by_call_count.csv").exists()
    assert (out_dir / "report.txt").exists()

    assert main(["report", "--report", str(out_dir / "report.json"),
                 "--out", str(out_dir)]) == 0
    assert (out_dir / "success_by_call_count.png").exists()
    assert (out_dir / "accuracy_breakdown.png").exists()


def test_run_no_feedback_flag_recorded(tmp_path):
    config = _write_config(tmp_path)
    assert main(["run", "--config", str(config), "--no-feedback"]) == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["config"]["no_feedback"] is True
    lines = (tmp_path / "out" / "transcripts.jsonl").read_text().splitlines()
    assert not any('"role": "feedback"' in line for line in lines)


def test_run_no_chain_records_fallback_source(tmp_path):
    config = _write_config(tmp_path)
    assert main(["run", "--config", str(config), "--no-chain"]) == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert all(d["exemplar_source"] == "source-dialog-fallback"
               for d in manifest["dialogs"])


def test_score_empty_transcripts_exits_2(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    assert main(["score", "--transcripts", str(empty),
                 "--corpus", str(FIXTURE_CORPUS), "--out", str(tmp_path)]) == 2


def test_score_mismatched_ids_exit_2(tmp_path):
    bogus = tmp_path / "bogus.jsonl"
    bogus.write_text(json.dumps({"dialog_id": "ghost", "domains": ["Weather"],
                                 "config_fingerprint": "", "status": "complete"})
                     + "\n", encoding="utf-8")
    assert main(["score", "--transcripts", str(bogus),
                 "--corpus", str(FIXTURE_CORPUS), "--out", str(tmp_path)]) == 2


def test_report_missing_input_exits_2(tmp_path):
    assert main(["report", "--report", str(tmp_path / "missing.json")]) == 2


def test_gen_example_with_oracle_profile(tmp_path, capsys):
    config = _write_config(tmp_path)
    assert main(["gen-example", "--config", str(config),
                 "--domains", "Weather"]) == 0
    out_dir = tmp_path / "out"
    assert (out_dir / "exemplar.jsonl").exists()
    quality = json.loads((out_dir / "exemplar-quality.json").read_text())
    assert quality["quality_check"] is True


def test_gen_example_unknown_domain_exits_3(tmp_path):
    config = _write_config(tmp_path)
    assert main(["gen-example", "--config", str(config),
                 "--domains", "Spaceships"]) == 3


def test_gen_example_cache_hit_skips_backend(tmp_path):
    config = _write_config(tmp_path)
    assert main(["gen-example", "--config", str(config),
                 "--domains", "Weather"]) == 0
    first = json.loads((tmp_path / "out" / "exemplar-quality.json").read_text())
    assert main(["gen-example", "--config", str(config),
                 "--domains", "Weather"]) == 0
    second = json.loads((tmp_path / "out" / "exemplar-quality.json").read_text())
    assert first["backend_calls"] == 1
    assert second["backend_calls"] == 0  # served from the persisted cache


def test_run_exits_1_when_no_dialog_completes(tmp_path):
    script = tmp_path / "script.json"
    script.write_text("{}", encoding="utf-8")
    config = tmp_path / "run.toml"
    config.write_text(
        f'corpus = "{FIXTURE_CORPUS}"\n'
        f'profile = "empty"\n'
        f'out = "{tmp_path / "out"}"\n'
        f'[profiles.empty]\n'
        f'kind = "replay"\n'
        f'script_path = "{script}"\n', encoding="utf-8")
    assert main(["run", "--config", str(config)]) == 1
