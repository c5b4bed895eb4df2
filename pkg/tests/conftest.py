import torch

# Keep CPU math reproducible and keep the small models from oversubscribing
# the machine during parallel-looking test phases.
torch.set_num_threads(2)

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
