"""Sweep the number of malicious clients and the norm threshold (a few minutes)."""

from zkflpq.harness import _print_rows, cmd_ablate_malicious, cmd_ablate_threshold
from zkflpq.protocol import ProtocolConfig

cfg = ProtocolConfig()
rows, _ = cmd_ablate_malicious(cfg)
_print_rows(rows)
print()
rows, _ = cmd_ablate_threshold(cfg)
_print_rows(rows)
