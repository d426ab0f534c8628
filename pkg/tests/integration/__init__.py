"""Integration tests - several services working together on small scenarios."""
