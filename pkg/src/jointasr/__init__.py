"""Joint speech + speaker recognition at desk scale: embedding fusion, a
transformer encoder with CTC and speaker heads, and adversarial evaluation
protocols (babble SNR sweeps, noise vocoding, sine-wave speech)."""

__version__ = "0.1.0"
