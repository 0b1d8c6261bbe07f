"""
cyclevc modules

- dsp: signal analysis and acoustic features
- autodiff: reverse-mode differentiation, layers and Adam
- cyclevae: the cyclic spectral conversion model
- vocoder: GAN waveform generator and discriminator
- pipeline: corpus ingest, training, conversion, evaluation and persistence
"""
