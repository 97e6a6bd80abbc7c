"""Multi-UAV IoT data harvesting simulator with a global-local map DDQN learner."""

__version__ = "0.1.0"
