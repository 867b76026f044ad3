"""Configuration, persistence, metrics, theory checks and the command line."""
