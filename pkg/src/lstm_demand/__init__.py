"""LSTM-based multi-step demand forecasting for e-grocery assortments."""

__version__ = "0.1.0"

HORIZON = 6
INPUT_WINDOW = 36
