"""Agent leave-one-out instrumental-variable estimation for call-center logs,
with a discrete-event simulator that supplies ground truth."""

__version__ = "0.1.0"
