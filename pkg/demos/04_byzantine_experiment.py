"""Three-way comparison under a scale-50 Byzantine client from round 4 (takes about half a minute)."""

from zkflpq.harness import _print_run, cmd_run
from zkflpq.protocol import ProtocolConfig

summary, records = cmd_run(ProtocolConfig())
_print_run(summary)
print("\nzkfl_pq rejections:")
for r in records:
    if r.mode == "zkfl_pq" and r.rejected:
        print(f"  round {r.round}: {r.rejected}")
