import copy

import pytest

SMALL_PENDULUM = {
    "environment": "pendulum",
    "episode_length": 6,
    "seeds": 3,
    "root_seed": 11,
    "initial_state": [3.141592653589793, 0.0],
    "true_params": [1.0, 1.0],
    "controller": {
        "sampled_actions": 16, "control_horizon": 8, "inverse_temperature": 10,
        "control_authority": 1.0, "terminal_cost": 0, "beta": 0,
        "ut": {"alpha": 0.5, "xi": 2, "kappa": 0},
    },
    "prior": {"low": [0.1, 0.1], "high": [5.0, 5.0]},
    "posterior": {"mean": [0.89, 0.90], "cov": [[0.01, 0.0], [0.0, 0.03]]},
    "variants": [
        {"name": "baseline", "propagation": "point", "params": "truth"},
        {"name": "ut_prior", "propagation": "ut", "params": "prior"},
        {"name": "ut_posterior", "propagation": "ut", "params": "posterior"},
        {"name": "mc_prior", "propagation": "mc", "params": "prior"},
        {"name": "mc_posterior", "propagation": "mc", "params": "posterior"},
    ],
    "inference": {
        "simulations": 80, "simulation_steps": 20, "policy": "reference",
        "dataset": "data.csv", "model": "mdn.bin", "posterior": "posterior.json",
        "train": {"epochs": 3, "batch_size": 16, "components": 2, "hidden": [6]},
    },
}


@pytest.fixture
def small_config_dict():
    return copy.deepcopy(SMALL_PENDULUM)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record a PASS/FAIL line for the terminal summary and echo it."""
    def report(number, name, passed, detail=""):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {name}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
