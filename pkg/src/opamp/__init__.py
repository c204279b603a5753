"""Operator-valued bias amplification for expanders and Cayley generating sets."""
