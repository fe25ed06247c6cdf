"""ftdriver: LoRA adapter fine-tuning against the scaudit file contracts."""

__version__ = "0.1.0"
