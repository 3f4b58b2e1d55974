"""Scanning-robust stylized QR codes by gated gradient optimization."""
