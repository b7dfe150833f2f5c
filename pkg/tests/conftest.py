import json
from pathlib import Path

DAG_TEXT = "w -> x\nx -> y\n"
SPEC_TEXT = "w |\nx | w\ny | x\n"
SWAPPED_SPEC_TEXT = "w |\nx | y\ny | w\n"


def write_bundle(root, goal="latent", *, fairness=None, spec_text=SPEC_TEXT, extra=None, seed=11):
    """Write a small config bundle under ``root`` and return the config path.

    The default bundle runs every automated suite on the conjugate normal
    model with exact posterior draws, and marks fairness not applicable.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "g.txt").write_text(DAG_TEXT)
    (root / "f.txt").write_text(spec_text)
    config = {
        "goal": goal,
        "seed": seed,
        "model": {"id": "normal_known_var", "params": {"n": 20}},
        "approximator": {"id": "exact", "params": {"n_chains": 4, "n_draws": 500}},
        "analyses": {
            "convergence": True,
            "estimation_speed": True,
            "causal_consistency": {"dag": "g.txt", "spec": "f.txt", "do": "x", "outcome": "y"},
            "parameter_recoverability": {"M": 100, "L": 49},
            "predictive_performance": True,
            "parsimony": True,
            "robustness": True,
            "fairness": fairness if fairness is not None else {"not_applicable": True},
        },
    }
    if extra:
        config.update(extra)
    path = root / "config.json"
    path.write_text(json.dumps(config, indent=2))
    return path


FAILING_DIF = {"dif": {"groups": {"a": [0.0, 1.0], "b": [1.0, 1.0]}, "threshold": 0.5}}


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
