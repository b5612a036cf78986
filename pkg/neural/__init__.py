# neural/__init__.py
"""From-scratch numpy LSTM language and sequence-to-sequence models."""
