"""gridscope: monitor and steer batch-scheduler jobs from anywhere."""

__version__ = "0.1.0"
