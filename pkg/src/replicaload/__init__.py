"""Load-balancing robustness of replicated storage allocations."""
