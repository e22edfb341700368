"""Data models: geometry, scenes, beliefs, episodes, wire messages, experiments."""
