"""Best-effort group membership (GRP) for dynamic ad hoc networks.

Node state machine, deterministic discrete-event simulator with scripted
topology, and predicate checker for execution traces.
"""

__version__ = "0.1.0"
