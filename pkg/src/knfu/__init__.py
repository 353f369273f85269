"""Federated knowledge-distillation lab.

Clients train small classifiers on non-IID local shards, exchange soft
labels over a shared transfer set, and fine-tune against fused knowledge.
The `knfu` fusion strategy weights each peer's knowledge by the inverse
squared KL distance between estimated class distributions; `fedmd`,
`selective_fd` and `local` baselines are included.
"""

__version__ = "0.1.0"
