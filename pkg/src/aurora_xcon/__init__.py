"""Unsupervised quality-diversity with contrastive features and extinction events."""
