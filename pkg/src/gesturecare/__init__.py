"""Vision-based need announcements from static hand gestures."""

__version__ = "0.1.0"
