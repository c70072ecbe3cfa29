"""Complex-coordinate quantum toolkit."""
