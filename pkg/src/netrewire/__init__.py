"""Learning edge rewirings that raise graph entropy, and measuring what they cost an attacker."""

__version__ = "0.1.0"
